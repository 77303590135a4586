//! Topic-model evaluation metrics.
//!
//! Embedding-based metrics work on the top `Z` words of each topic. When a
//! topic holds fewer than `Z` words (cleaning without refill) every metric
//! uses the words available and the report records the effective sizes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Corpus, EmbeddingSet};
use crate::scalar::Scalar;
use crate::topics::{Topic, TopicSet};
use crate::vector::{centroid, cosine_similarity, StopwordCentroid};

pub const DEFAULT_Z: usize = 10;
pub const DEFAULT_REPETITIONS: usize = 50;
pub const DEFAULT_NPMI_WINDOW: usize = 10;
pub const DEFAULT_NPMI_EPSILON: f64 = 1e-12;

/// Column order of the headline CSV row.
pub const HEADLINE_COLUMNS: [&str; 8] = [
    "NPMI", "COHPW", "COH", "TOP DIV", "WESS", "EXPRS", "ISIM", "INT",
];

fn effective_z<T>(topic: &Topic<T>, z: usize) -> usize {
    z.min(topic.words.len())
}

fn check_k<T>(topics: &TopicSet<T>, min: usize) -> Result<()> {
    if topics.k() < min {
        return Err(Error::Parameter(format!(
            "need at least {min} topics, got {}",
            topics.k()
        )));
    }
    Ok(())
}

/// Cosine similarity of a topic's weighted centroid to the stopword centroid.
pub fn topic_expressivity<T: Scalar>(topic: &Topic<T>, psi: &StopwordCentroid<T>) -> Result<T> {
    cosine_similarity(&topic.weighted_centroid, psi.vector())
}

/// Mean similarity of the weighted topic centroids to the stopword centroid.
pub fn expressivity<T: Scalar>(topics: &TopicSet<T>, psi: &StopwordCentroid<T>) -> Result<T> {
    check_k(topics, 1)?;
    let per = topics
        .topics
        .iter()
        .map(|t| topic_expressivity(t, psi))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&per))
}

/// Sum of pairwise similarities among the top `z` words.
pub fn embedding_coherence<T: Scalar>(topic: &Topic<T>, z: usize) -> Result<T> {
    let vs = topic.top_vectors(z);
    if vs.len() < 2 {
        return Err(Error::Parameter(format!(
            "coherence needs Z >= 2, have {}",
            vs.len()
        )));
    }
    let mut sum = T::zero();
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            sum += cosine_similarity(vs[i], vs[j])?;
        }
    }
    Ok(sum)
}

/// Mean pairwise word similarity within a topic.
pub fn mean_pairwise_coherence<T: Scalar>(topic: &Topic<T>, z: usize) -> Result<T> {
    let n = effective_z(topic, z);
    let sum = embedding_coherence(topic, z)?;
    Ok(sum / T::count(n * (n - 1) / 2))
}

/// Model coherence: `2 / (K (Z-1) Z)` times the summed per-topic
/// coherences, i.e. the mean pairwise similarity over all topics.
pub fn model_coherence<T: Scalar>(topics: &TopicSet<T>, z: usize) -> Result<T> {
    check_k(topics, 1)?;
    let per = topics
        .topics
        .iter()
        .map(|t| mean_pairwise_coherence(t, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&per))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WessMode {
    /// Mean over the `K(K-1)/2` topic pairs.
    #[default]
    PairMean,
    /// Pair sum multiplied by `(K-1)K/2`.
    Verbatim,
}

/// Similarity between weighted topic centroids over all unordered pairs.
pub fn wess<T: Scalar>(topics: &TopicSet<T>, mode: WessMode) -> Result<T> {
    check_k(topics, 2)?;
    let k = topics.k();
    let mut sum = T::zero();
    for i in 0..k {
        for j in i + 1..k {
            sum += cosine_similarity(
                &topics.topics[i].weighted_centroid,
                &topics.topics[j].weighted_centroid,
            )?;
        }
    }
    let pairs = T::count(k * (k - 1) / 2);
    Ok(match mode {
        WessMode::PairMean => sum / pairs,
        WessMode::Verbatim => sum * pairs,
    })
}

/// Fraction of the top `z` words for which `intruder` is less similar than
/// every other top word.
pub fn intruder_accuracy<T: Scalar>(topic: &Topic<T>, intruder: &[T], z: usize) -> Result<T> {
    let vs = topic.top_vectors(z);
    if vs.len() < 2 {
        return Err(Error::Parameter(format!(
            "intruder accuracy needs Z >= 2, have {}",
            vs.len()
        )));
    }
    let to_intruder = vs
        .iter()
        .map(|v| cosine_similarity(v, intruder))
        .collect::<Result<Vec<_>>>()?;
    let mut hits = 0usize;
    for i in 0..vs.len() {
        let mut all = true;
        for j in 0..vs.len() {
            if i != j && to_intruder[i] >= cosine_similarity(vs[i], vs[j])? {
                all = false;
                break;
            }
        }
        hits += all as usize;
    }
    Ok(T::count(hits) / T::count(vs.len()))
}

/// Mean similarity of the top `z` words to `intruder`.
pub fn intruder_similarity<T: Scalar>(topic: &Topic<T>, intruder: &[T], z: usize) -> Result<T> {
    let vs = topic.top_vectors(z);
    if vs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = vs
        .iter()
        .map(|v| cosine_similarity(v, intruder))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&s))
}

/// Similarity between a topic's plain centroid and the centroid obtained
/// after replacing the word at `position` with `intruder`.
pub fn intruder_shift_single<T: Scalar>(
    topic: &Topic<T>,
    intruder: &[T],
    position: usize,
    z: usize,
) -> Result<T> {
    let vs = topic.top_vectors(z);
    if position >= vs.len() {
        return Err(Error::Parameter(format!(
            "position {position} out of range {}",
            vs.len()
        )));
    }
    let base = centroid(&vs)?;
    let mut swapped = vs.clone();
    swapped[position] = intruder;
    let shifted = centroid(&swapped)?;
    cosine_similarity(&base, &shifted)
}

/// One random intruder assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntruderDraw {
    /// Topic being scored.
    pub source_topic: usize,
    /// Topic the intruder comes from; never equal to `source_topic`.
    pub target_topic: usize,
    /// Rank of the intruder within the target topic.
    pub intruder: usize,
    /// Rank of the source word replaced when computing the shift.
    pub replaced: usize,
    pub repetition: usize,
}

/// Draws the intruder for `(repetition, topic)`.
///
/// Each pair uses its own ChaCha stream `repetition * K + topic` under
/// `seed`, so draws do not depend on evaluation order.
pub fn draw_intruder<T>(
    topics: &TopicSet<T>,
    z: usize,
    seed: u64,
    repetition: usize,
    topic: usize,
) -> IntruderDraw {
    let k = topics.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((repetition * k + topic) as u64);
    let mut target = rng.random_range(0..k - 1);
    if target >= topic {
        target += 1;
    }
    let intruder = rng.random_range(0..effective_z(&topics.topics[target], z));
    let replaced = rng.random_range(0..effective_z(&topics.topics[topic], z));
    IntruderDraw {
        source_topic: topic,
        target_topic: target,
        intruder,
        replaced,
        repetition,
    }
}

/// Per-topic intruder metrics averaged over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct IntruderScores<T> {
    pub int: Vec<T>,
    pub isim: Vec<T>,
    pub ish: Vec<T>,
}

/// Runs `repetitions` intruder draws per topic and scores INT, ISIM and ISH
/// on the same draws.
pub fn intruder_metrics<T: Scalar>(
    topics: &TopicSet<T>,
    z: usize,
    seed: u64,
    repetitions: usize,
) -> Result<IntruderScores<T>> {
    check_k(topics, 2)?;
    if repetitions == 0 {
        return Err(Error::Parameter("repetitions must be positive".into()));
    }
    let k = topics.k();
    let per: Vec<(T, T, T)> = (0..k)
        .into_par_iter()
        .map(|t| {
            let topic = &topics.topics[t];
            let (mut a, mut s, mut h) = (T::zero(), T::zero(), T::zero());
            for r in 0..repetitions {
                let d = draw_intruder(topics, z, seed, r, t);
                let v = &topics.topics[d.target_topic].words[d.intruder].vector;
                a += intruder_accuracy(topic, v, z).map_err(Error::in_metric("INT"))?;
                s += intruder_similarity(topic, v, z).map_err(Error::in_metric("ISIM"))?;
                h += intruder_shift_single(topic, v, d.replaced, z)
                    .map_err(Error::in_metric("ISH"))?;
            }
            let n = T::count(repetitions);
            Ok((a / n, s / n, h / n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntruderScores {
        int: per.iter().map(|p| p.0).collect(),
        isim: per.iter().map(|p| p.1).collect(),
        ish: per.iter().map(|p| p.2).collect(),
    })
}

/// Model-level intruder shift.
pub fn intruder_shift<T: Scalar>(
    topics: &TopicSet<T>,
    z: usize,
    seed: u64,
    repetitions: usize,
) -> Result<T> {
    Ok(mean(&intruder_metrics(topics, z, seed, repetitions)?.ish))
}

/// Unique top words over total top-word slots.
pub fn topic_diversity<T>(topics: &TopicSet<T>, z: usize) -> Result<f64> {
    check_k(topics, 1)?;
    let mut unique = HashSet::new();
    let mut total = 0usize;
    for t in &topics.topics {
        for w in t.words.iter().take(z) {
            unique.insert(w.word.as_str());
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(unique.len() as f64 / total as f64)
}

/// Boolean sliding-window counts over a reference corpus, restricted to a
/// fixed word set.
#[derive(Debug, Clone)]
pub struct WindowCounts {
    index: HashMap<String, usize>,
    single: Vec<u64>,
    pair: Vec<u64>,
    windows: u64,
}

impl WindowCounts {
    /// Documents no longer than `window` count as a single window.
    pub fn new<S: AsRef<str>>(reference: &Corpus, words: &[S], window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Parameter("window must be positive".into()));
        }
        if reference.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut index = HashMap::new();
        for w in words {
            let n = index.len();
            index.entry(w.as_ref().to_string()).or_insert(n);
        }
        let u = index.len();
        let empty = || (vec![0u64; u], vec![0u64; u * u], 0u64);
        let (single, pair, windows) = reference
            .documents()
            .par_iter()
            .fold(empty, |(mut single, mut pair, mut windows), doc| {
                let ids: Vec<Option<usize>> =
                    doc.tokens.iter().map(|t| index.get(t).copied()).collect();
                let n_windows = ids.len().saturating_sub(window) + 1;
                let mut present = Vec::with_capacity(window);
                for start in 0..n_windows {
                    present.clear();
                    present.extend(
                        ids[start..(start + window).min(ids.len())]
                            .iter()
                            .flatten()
                            .copied(),
                    );
                    present.sort_unstable();
                    present.dedup();
                    for (a, &i) in present.iter().enumerate() {
                        single[i] += 1;
                        for &j in &present[a + 1..] {
                            pair[i * u + j] += 1;
                        }
                    }
                }
                windows += n_windows as u64;
                (single, pair, windows)
            })
            .reduce(empty, |mut a, b| {
                a.0.iter_mut().zip(b.0).for_each(|(x, y)| *x += y);
                a.1.iter_mut().zip(b.1).for_each(|(x, y)| *x += y);
                (a.0, a.1, a.2 + b.2)
            });
        Ok(WindowCounts {
            index,
            single,
            pair,
            windows,
        })
    }

    pub fn windows(&self) -> u64 {
        self.windows
    }

    pub fn count(&self, w: &str) -> u64 {
        self.index.get(w).map_or(0, |&i| self.single[i])
    }

    pub fn joint_count(&self, a: &str, b: &str) -> u64 {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) if i != j => {
                let (i, j) = if i < j { (i, j) } else { (j, i) };
                self.pair[i * self.single.len() + j]
            }
            (Some(&i), Some(_)) => self.single[i],
            _ => 0,
        }
    }

    /// Normalised PMI of two words, in `[-1, 1]`. Words that never occur
    /// give -1.
    pub fn npmi(&self, a: &str, b: &str, epsilon: f64) -> f64 {
        let (ca, cb) = (self.count(a), self.count(b));
        if ca == 0 || cb == 0 {
            return -1.0;
        }
        let n = self.windows as f64;
        let pj = self.joint_count(a, b) as f64 / n + epsilon;
        let denom = -pj.ln();
        if denom <= 0.0 {
            return 1.0;
        }
        let pmi = pj.ln() - (ca as f64 / n).ln() - (cb as f64 / n).ln();
        (pmi / denom).clamp(-1.0, 1.0)
    }
}

/// Mean NPMI over word pairs of each topic's top `z` words.
pub fn npmi_per_topic<T>(
    topics: &TopicSet<T>,
    reference: &Corpus,
    z: usize,
    window: usize,
    epsilon: f64,
) -> Result<Vec<f64>> {
    check_k(topics, 1)?;
    let words: Vec<&str> = topics
        .topics
        .iter()
        .flat_map(|t| t.words.iter().take(z).map(|w| w.word.as_str()))
        .collect();
    let counts = WindowCounts::new(reference, &words, window)?;
    topics
        .topics
        .iter()
        .map(|t| {
            let ws: Vec<&str> = t.words.iter().take(z).map(|w| w.word.as_str()).collect();
            if ws.len() < 2 {
                return Err(Error::Parameter(format!(
                    "NPMI needs Z >= 2, have {}",
                    ws.len()
                )));
            }
            let mut sum = 0.0;
            let mut n = 0usize;
            for i in 0..ws.len() {
                for j in i + 1..ws.len() {
                    sum += counts.npmi(ws[i], ws[j], epsilon);
                    n += 1;
                }
            }
            Ok(sum / n as f64)
        })
        .collect()
}

/// Model-level NPMI: mean of the per-topic values.
pub fn npmi_coherence<T>(
    topics: &TopicSet<T>,
    reference: &Corpus,
    z: usize,
    epsilon: f64,
) -> Result<f64> {
    let per = npmi_per_topic(topics, reference, z, DEFAULT_NPMI_WINDOW, epsilon)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::count(xs.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub z: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub npmi_window: usize,
    pub npmi_epsilon: f64,
    pub wess_mode: WessMode,
    /// Free-form name of the embedding set the metrics were computed in.
    pub embedding_id: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            z: DEFAULT_Z,
            repetitions: DEFAULT_REPETITIONS,
            seed: 0,
            npmi_window: DEFAULT_NPMI_WINDOW,
            npmi_epsilon: DEFAULT_NPMI_EPSILON,
            wess_mode: WessMode::PairMean,
            embedding_id: None,
        }
    }
}

/// Optional inputs for metrics that need more than the topic vectors.
#[derive(Debug, Clone, Copy)]
pub struct EvalExtras<'a, T> {
    /// Reference corpus for NPMI.
    pub reference: Option<&'a Corpus>,
    /// Second embedding set for the pairwise coherence column (COHPW).
    pub pairwise_embeddings: Option<&'a EmbeddingSet<T>>,
}

impl<T> Default for EvalExtras<'_, T> {
    fn default() -> Self {
        EvalExtras {
            reference: None,
            pairwise_embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(flatten)]
    pub eval: EvalConfig,
    /// Words actually used per topic, `min(Z, topic length)`.
    pub effective_z: Vec<usize>,
    pub k: usize,
}

/// Every metric for one topic set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: ReportConfig,
    pub per_topic: BTreeMap<String, Vec<f64>>,
    pub model: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.model.get(metric).copied()
    }

    /// Header plus one row in [`HEADLINE_COLUMNS`] order; metrics that were
    /// not computed are left empty.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADLINE_COLUMNS)?;
        out.write_record(
            HEADLINE_COLUMNS
                .iter()
                .map(|c| self.get(c).map(|v| v.to_string()).unwrap_or_default()),
        )?;
        out.flush()?;
        Ok(())
    }
}

/// Computes all metrics with a shared configuration.
pub fn evaluate_all<T: Scalar>(
    topics: &TopicSet<T>,
    psi: &StopwordCentroid<T>,
    extras: EvalExtras<'_, T>,
    config: &EvalConfig,
) -> Result<MetricReport> {
    let z = config.z;
    if z < 2 {
        return Err(Error::Parameter(format!("Z must be at least 2, got {z}")));
    }
    let f = |xs: Vec<T>| xs.into_iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    let mut per_topic = BTreeMap::new();
    let mut model = BTreeMap::new();
    let mut put = |name: &str, values: Vec<f64>| {
        model.insert(
            name.to_string(),
            values.iter().sum::<f64>() / values.len() as f64,
        );
        per_topic.insert(name.to_string(), values);
    };

    let exprs = topics
        .topics
        .iter()
        .map(|t| topic_expressivity(t, psi))
        .collect::<Result<Vec<_>>>()
        .map_err(Error::in_metric("EXPRS"))?;
    put("EXPRS", f(exprs));

    let coh = topics
        .topics
        .iter()
        .map(|t| mean_pairwise_coherence(t, z))
        .collect::<Result<Vec<_>>>()
        .map_err(Error::in_metric("COH"))?;
    put("COH", f(coh));

    if let Some(alt) = extras.pairwise_embeddings {
        let re = topics.reembed(alt).map_err(Error::in_metric("COHPW"))?;
        let cohpw = re
            .topics
            .iter()
            .map(|t| mean_pairwise_coherence(t, z))
            .collect::<Result<Vec<_>>>()
            .map_err(Error::in_metric("COHPW"))?;
        put("COHPW", f(cohpw));
    }

    if let Some(reference) = extras.reference {
        let npmi = npmi_per_topic(
            topics,
            reference,
            z,
            config.npmi_window,
            config.npmi_epsilon,
        )
        .map_err(Error::in_metric("NPMI"))?;
        put("NPMI", npmi);
    }

    if topics.k() >= 2 {
        let scores = intruder_metrics(topics, z, config.seed, config.repetitions)?;
        put("INT", f(scores.int));
        put("ISIM", f(scores.isim));
        put("ISH", f(scores.ish));
        let w = wess(topics, config.wess_mode).map_err(Error::in_metric("WESS"))?;
        model.insert("WESS".into(), w.as_f64());
    }

    model.insert(
        "TOP DIV".into(),
        topic_diversity(topics, z).map_err(Error::in_metric("TOP DIV"))?,
    );

    Ok(MetricReport {
        config: ReportConfig {
            eval: config.clone(),
            effective_z: topics.topics.iter().map(|t| effective_z(t, z)).collect(),
            k: topics.k(),
        },
        per_topic,
        model,
    })
}
