//! Checks how well the intruder metrics find planted intruder words, against
//! the true intruder and against human annotators.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{EmbeddingSet, IntruderInstance};
use crate::scalar::Scalar;
use crate::vector::{centroid, cosine_similarity};

/// Per-word scoring rule derived from one of the intruder metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreStyle {
    /// Similarity of the full centroid to the centroid without the word.
    #[serde(rename = "ISH")]
    Ish,
    /// Share of other words whose unique least-similar neighbour is the word.
    #[serde(rename = "INT")]
    Int,
    /// Mean similarity to the other words.
    #[serde(rename = "ISIM")]
    Isim,
}

impl ScoreStyle {
    pub const ALL: [ScoreStyle; 3] = [ScoreStyle::Ish, ScoreStyle::Int, ScoreStyle::Isim];

    pub fn name(self) -> &'static str {
        match self {
            ScoreStyle::Ish => "ISH",
            ScoreStyle::Int => "INT",
            ScoreStyle::Isim => "ISIM",
        }
    }

    /// Which end of the score range marks the intruder.
    pub fn direction(self) -> Direction {
        match self {
            ScoreStyle::Int => Direction::Highest,
            ScoreStyle::Ish | ScoreStyle::Isim => Direction::Lowest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Lowest,
    Highest,
}

fn lookup<'a, T: Scalar>(
    embeddings: &'a EmbeddingSet<T>,
    words: &[String],
) -> Result<Vec<&'a [T]>> {
    words
        .iter()
        .map(|w| {
            embeddings
                .get(w)
                .ok_or_else(|| Error::MissingWord(w.clone()))
        })
        .collect()
}

/// Scores every displayed word of `instance`.
pub fn score_words<T: Scalar>(
    instance: &IntruderInstance,
    embeddings: &EmbeddingSet<T>,
    style: ScoreStyle,
) -> Result<BTreeMap<String, T>> {
    let words = &instance.displayed_words;
    let vs = lookup(embeddings, words)?;
    let n = vs.len();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "instance {} shows {n} words",
            instance.topic_id
        )));
    }
    let mut sim = vec![T::zero(); n * n];
    for i in 0..n {
        sim[i * n + i] = T::one();
        for j in i + 1..n {
            let s = cosine_similarity(vs[i], vs[j])?;
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }
    let scores: Vec<T> = match style {
        ScoreStyle::Isim => (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| sim[i * n + j])
                    .sum::<T>()
                    / T::count(n - 1)
            })
            .collect(),
        ScoreStyle::Int => {
            let mut votes = vec![0usize; n];
            for j in 0..n {
                let others = (0..n).filter(|&i| i != j);
                let min = others
                    .clone()
                    .map(|i| sim[j * n + i])
                    .fold(T::infinity(), T::min);
                let mut at_min = others.filter(|&i| sim[j * n + i] == min);
                if let (Some(i), None) = (at_min.next(), at_min.next()) {
                    votes[i] += 1;
                }
            }
            votes
                .iter()
                .map(|&v| T::count(v) / T::count(n - 1))
                .collect()
        }
        ScoreStyle::Ish => {
            let full = centroid(&vs)?;
            (0..n)
                .map(|i| {
                    let rest: Vec<&[T]> = vs
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, v)| *v)
                        .collect();
                    cosine_similarity(&full, &centroid(&rest)?)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(words.iter().cloned().zip(scores).collect())
}

/// The word at the extreme score, lexicographically first on ties, and
/// whether a tie occurred.
pub fn identify_intruder<T: Scalar>(
    scores: &BTreeMap<String, T>,
    direction: Direction,
) -> Option<(String, bool)> {
    let better = |a: T, b: T| match direction {
        Direction::Lowest => a < b,
        Direction::Highest => a > b,
    };
    let mut best: Option<(&String, T)> = None;
    let mut tie = false;
    // BTreeMap iterates in lexicographic order, so the first extreme wins.
    for (w, &s) in scores {
        match best {
            None => best = Some((w, s)),
            Some((_, b)) if better(s, b) => {
                best = Some((w, s));
                tie = false;
            }
            Some((_, b)) if s == b => tie = true,
            _ => {}
        }
    }
    best.map(|(w, _)| (w.clone(), tie))
}

/// Gap between the chosen score and the runner-up, oriented so that a
/// larger value means a more confident pick.
fn margin<T: Scalar>(scores: &BTreeMap<String, T>, direction: Direction) -> f64 {
    let mut v: Vec<f64> = scores.values().map(|s| s.as_f64()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    match (direction, v.len()) {
        (_, 0 | 1) => 0.0,
        (Direction::Lowest, _) => v[1] - v[0],
        (Direction::Highest, n) => v[n - 1] - v[n - 2],
    }
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Outcome of one metric on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub topic_id: String,
    pub picked: String,
    pub tie: bool,
    pub margin: f64,
    pub hit_true: bool,
    /// `None` when the instance has no human selections.
    pub hit_human: Option<bool>,
    pub human_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValidation {
    pub metric: ScoreStyle,
    pub hits_true: usize,
    pub hits_human: usize,
    pub accuracy_true: f64,
    pub accuracy_human: Option<f64>,
    /// Serialized as `null` when undefined.
    pub pearson_true: Option<f64>,
    pub pearson_human: Option<f64>,
    pub ties: usize,
    pub outcomes: Vec<InstanceOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub instances: usize,
    /// Instances with at least one human selection.
    pub annotated_instances: usize,
    pub embedding_id: Option<String>,
    pub strict: bool,
    pub pearson_true_series: String,
    pub pearson_human_series: String,
    pub metrics: Vec<MetricValidation>,
}

pub const PEARSON_TRUE_SERIES: &str =
    "score margin between pick and runner-up vs. true-intruder hit (0/1)";
pub const PEARSON_HUMAN_SERIES: &str =
    "true-intruder hit (0/1) vs. fraction of annotators choosing the true intruder";

/// Scores every instance with every style and aggregates accuracies and
/// correlations.
///
/// With `strict` off, a pick matches the humans when it is among the most
/// frequently chosen words. With `strict` on, there must be a single most
/// chosen word, and tied metric picks count as misses.
pub fn validate<T: Scalar>(
    instances: &[IntruderInstance],
    embeddings: &EmbeddingSet<T>,
    strict: bool,
) -> Result<ValidationResult> {
    if instances.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 instances, got {}",
            instances.len()
        )));
    }
    let metrics = ScoreStyle::ALL
        .iter()
        .map(|&style| {
            let outcomes = instances
                .par_iter()
                .map(|inst| {
                    let scores = score_words(inst, embeddings, style)?;
                    let (picked, tie) =
                        identify_intruder(&scores, style.direction()).ok_or(Error::EmptyInput)?;
                    let counts = !(strict && tie);
                    let modes = inst.modal_selections();
                    let hit_human = (!modes.is_empty()).then(|| {
                        counts && modes.contains(&picked.as_str()) && (!strict || modes.len() == 1)
                    });
                    Ok(InstanceOutcome {
                        topic_id: inst.topic_id.clone(),
                        hit_true: counts && picked == inst.true_intruder,
                        hit_human,
                        human_rate: inst.human_detection_rate(),
                        margin: margin(&scores, style.direction()),
                        picked,
                        tie,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(Error::in_metric(style.name()))?;
            Ok(summarize(style, outcomes))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationResult {
        instances: instances.len(),
        annotated_instances: instances
            .iter()
            .filter(|i| !i.human_selections.is_empty())
            .count(),
        embedding_id: None,
        strict,
        pearson_true_series: PEARSON_TRUE_SERIES.into(),
        pearson_human_series: PEARSON_HUMAN_SERIES.into(),
        metrics,
    })
}

fn summarize(metric: ScoreStyle, outcomes: Vec<InstanceOutcome>) -> MetricValidation {
    let n = outcomes.len();
    let hits_true = outcomes.iter().filter(|o| o.hit_true).count();
    let annotated: Vec<&InstanceOutcome> =
        outcomes.iter().filter(|o| o.hit_human.is_some()).collect();
    let hits_human = annotated
        .iter()
        .filter(|o| o.hit_human == Some(true))
        .count();
    let hit_f = |o: &InstanceOutcome| if o.hit_true { 1.0 } else { 0.0 };
    let margins: Vec<f64> = outcomes.iter().map(|o| o.margin).collect();
    let hits: Vec<f64> = outcomes.iter().map(hit_f).collect();
    let human_hits: Vec<f64> = annotated.iter().map(|o| hit_f(o)).collect();
    let rates: Vec<f64> = annotated.iter().map(|o| o.human_rate.unwrap()).collect();
    MetricValidation {
        metric,
        hits_true,
        hits_human,
        accuracy_true: hits_true as f64 / n as f64,
        accuracy_human: (!annotated.is_empty()).then(|| hits_human as f64 / annotated.len() as f64),
        pearson_true: pearson(&margins, &hits),
        pearson_human: pearson(&human_hits, &rates),
        ties: outcomes.iter().filter(|o| o.tie).count(),
        outcomes,
    }
}

impl ValidationResult {
    /// One row per metric; undefined values are written as `undefined`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "metric",
            "accuracy_true",
            "accuracy_human",
            "pearson_true",
            "pearson_human",
        ])?;
        for m in &self.metrics {
            out.write_record([
                m.metric.name().to_string(),
                m.accuracy_true.to_string(),
                fmt(m.accuracy_human),
                fmt(m.pearson_true),
                fmt(m.pearson_human),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn metric(&self, style: ScoreStyle) -> &MetricValidation {
        self.metrics
            .iter()
            .find(|m| m.metric == style)
            .expect("all styles are scored")
    }
}

/// Words used by `instances` that lack an embedding.
pub fn missing_words<'a, T: Scalar>(
    instances: &'a [IntruderInstance],
    embeddings: &EmbeddingSet<T>,
) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    instances
        .iter()
        .flat_map(|i| i.displayed_words.iter())
        .filter(|w| !embeddings.contains(w) && seen.insert(w.as_str()))
        .map(|w| w.as_str())
        .collect()
}
