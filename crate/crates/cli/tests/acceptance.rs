//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criteria that need external data print SKIP unless the data is
//! configured through environment variables.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use embtopic::clustering::{fit_gmm, select_k, ClusterCentroids, Criterion};
use embtopic::io::{
    read_embedding_set, write_embedding_set, Corpus, Document, EmbeddingSet, IntruderInstance,
};
use embtopic::metrics::{
    draw_intruder, evaluate_all, intruder_accuracy, intruder_similarity, topic_diversity,
    EvalConfig, EvalExtras, MetricReport, WindowCounts,
};
use embtopic::topics::{
    candidates_from_embeddings, clean_topic, extract_topics, CandidateVocabulary, TopicSet,
};
use embtopic::validation::{pearson, validate, ScoreStyle};
use embtopic::vector::StopwordCentroid;
use embtopic_cli::commands::{
    cmd_fit, cmd_run, cmd_topics, cmd_validate, ValidateOptions, TOPICS_FILE,
};
use embtopic_cli::{PipelineArgs, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

struct Gate {
    failed: usize,
}

impl Gate {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result =
            std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) if detail.starts_with("SKIP: ") => {
                println!("SKIP  {name}: {}", &detail[6..])
            }
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.1}s)");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let mut gate = Gate { failed: 0 };
    gate.check("em-monotonicity", em_monotonicity);
    gate.check("model-selection", model_selection);
    gate.check(
        "metric-bounds-and-invariances",
        metric_bounds_and_invariances,
    );
    gate.check("oracle-equivalence", oracle_equivalence);
    gate.check("intruder-construction", intruder_construction);
    gate.check("corpus-expansion", corpus_expansion);
    gate.check("cleaning", cleaning);
    gate.check("determinism", determinism);
    gate.check("validation-harness", validation_harness);
    gate.check(
        "data-reproduction-intruder-correlation",
        data_intruder_correlation,
    );
    gate.check("data-reproduction-expansion-signs", data_expansion_signs);
    if gate.failed > 0 {
        println!("{} acceptance criteria failed", gate.failed);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn blob_set(
    rng: &mut ChaCha8Rng,
    centers: &[Vec<f64>],
    per: &[usize],
    sigma: f64,
) -> (EmbeddingSet<f64>, Vec<usize>) {
    let n = Normal::new(0.0, sigma).unwrap();
    let mut entries = Vec::new();
    let mut labels = Vec::new();
    for (c, (center, &count)) in centers.iter().zip(per).enumerate() {
        for _ in 0..count {
            entries.push((
                format!("d{}", entries.len()),
                center.iter().map(|x| x + n.sample(rng)).collect(),
            ));
            labels.push(c);
        }
    }
    (
        EmbeddingSet::from_entries(centers[0].len(), entries).unwrap(),
        labels,
    )
}

// --- clustering ---------------------------------------------------------

fn em_monotonicity() -> Outcome {
    const TOL: f64 = 1e-8;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_drop = 0.0f64;
    let mut worst_row = 0.0f64;
    for trial in 0..50 {
        let k = rng.random_range(1..=6);
        let r = rng.random_range(2..=8);
        let m = rng.random_range(20..=500).max(k * 3);
        let true_k = rng.random_range(1..=6);
        let centers: Vec<Vec<f64>> = (0..true_k)
            .map(|_| (0..r).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let per: Vec<usize> = (0..true_k)
            .map(|i| m / true_k + usize::from(i < m % true_k))
            .collect();
        let sigma = rng.random_range(0.3..2.0);
        let (docs, _) = blob_set(&mut rng, &centers, &per, sigma);
        let (model, theta) = fit_gmm(&docs, k, trial).map_err(|e| format!("trial {trial}: {e}"))?;
        for w in model.trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        for i in 0..theta.rows() {
            worst_row = worst_row.max((theta.row(i).iter().sum::<f64>() - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst_drop <= TOL, || {
        format!("log-likelihood decreased by {worst_drop:e} > {TOL:e}")
    })?;
    ensure(worst_row <= 1e-9, || {
        format!("theta row sum off by {worst_row:e}")
    })?;
    ensure(secs < 60.0, || format!("took {secs:.1}s >= 60s"))?;
    Ok(format!("50 fits, worst step decrease {worst_drop:.1e} (tol 1e-8), worst row-sum error {worst_row:.1e} (tol 1e-9)"))
}

fn model_selection() -> Outcome {
    let sigma = 1.0;
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![5.0, 10.0]];
    let mut picked3 = 0;
    let mut worst_purity: f64 = 1.0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
        let (docs, labels) = blob_set(&mut rng, &centers, &[100, 100, 100], sigma);
        let (k, _) = select_k(&docs, 1..=6, Criterion::Bic, trial).map_err(|e| e.to_string())?;
        if k == 3 {
            picked3 += 1;
        }
        let (_, theta) = fit_gmm(&docs, 3, trial + 3).map_err(|e| e.to_string())?;
        worst_purity = worst_purity.min(common::purity(&theta.hard_assignments(), &labels, 3));
    }
    ensure(picked3 >= 95, || {
        format!("BIC chose K=3 in {picked3}/100 trials (need >= 95)")
    })?;
    ensure(worst_purity >= 0.98, || {
        format!("worst purity {worst_purity} < 0.98")
    })?;
    Ok(format!("BIC chose K=3 in {picked3}/100 trials (need >= 95); worst purity {worst_purity:.3} (need >= 0.98)"))
}

// --- metrics --------------------------------------------------------------

struct Case {
    embeddings: EmbeddingSet<f64>,
    candidates: CandidateVocabulary<f64>,
    centroids: ClusterCentroids<f64>,
    topics: TopicSet<f64>,
    stopwords: Vec<Vec<f64>>,
    corpus: Corpus,
    z: usize,
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let dim = rng.random_range(3..=10);
    let n = rng.random_range(10..=50);
    let k = rng.random_range(2..=5);
    let z = rng.random_range(2..=6);
    let v = |rng: &mut ChaCha8Rng| {
        (0..dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let entries: Vec<(String, Vec<f64>)> = (0..n).map(|i| (format!("w{i:02}"), v(rng))).collect();
    let embeddings = EmbeddingSet::from_entries(dim, entries).unwrap();
    let candidates = candidates_from_embeddings(embeddings.clone()).unwrap();
    let centroids = ClusterCentroids::new((0..k).map(|_| v(rng)).collect()).unwrap();
    let topics = extract_topics(&candidates, &centroids, z).unwrap();
    let stopwords = (0..3).map(|_| v(rng)).collect();
    // only part of the vocabulary occurs, so some words never co-occur
    let used = rng.random_range(n / 2..=n);
    let docs = (0..8)
        .map(|d| {
            let len = rng.random_range(3..=25);
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("w{:02}", rng.random_range(0..used)))
                .collect();
            Document {
                id: format!("doc{d}"),
                tokens,
            }
        })
        .collect();
    Case {
        embeddings,
        candidates,
        centroids,
        topics,
        stopwords,
        corpus: Corpus::new(docs).unwrap(),
        z,
    }
}

fn psi_of(stopwords: &[Vec<f64>], scale: f64) -> StopwordCentroid<f64> {
    let dim = stopwords[0].len();
    let mut c = vec![0.0; dim];
    for s in stopwords {
        for (a, b) in c.iter_mut().zip(s) {
            *a += b * scale / stopwords.len() as f64;
        }
    }
    StopwordCentroid::from_vector(c)
}

fn report(case: &Case, topics: &TopicSet<f64>, scale: f64, seed: u64) -> MetricReport {
    let cfg = EvalConfig {
        z: case.z,
        seed,
        ..Default::default()
    };
    let extras = EvalExtras {
        reference: Some(&case.corpus),
        pairwise_embeddings: None,
    };
    evaluate_all(topics, &psi_of(&case.stopwords, scale), extras, &cfg).unwrap()
}

fn argsort_columns(t: &TopicSet<f64>, words: &[String]) -> Vec<Vec<usize>> {
    (0..t.k())
        .map(|k| {
            let col = t.beta_column(k);
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|&a, &b| {
                col[b]
                    .partial_cmp(&col[a])
                    .unwrap()
                    .then_with(|| words[a].cmp(&words[b]))
            });
            idx
        })
        .collect()
}

fn metric_bounds_and_invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let bounds: &[(&str, f64, f64)] = &[
        ("EXPRS", -1.0, 1.0),
        ("ISIM", -1.0, 1.0),
        ("WESS", -1.0, 1.0),
        ("COH", -1.0, 1.0),
        ("ISH", -1.0, 1.0),
        ("INT", 0.0, 1.0),
        ("TOP DIV", 0.0, 1.0),
        ("NPMI", -1.0, 1.0),
    ];
    let cosine_based = ["EXPRS", "ISIM", "WESS", "COH", "ISH", "INT"];
    let mut worst_scale = 0.0f64;
    for case_no in 0..1000 {
        let case = random_case(&mut rng);
        let base = report(&case, &case.topics, 1.0, case_no);
        for &(name, lo, hi) in bounds {
            let v = base.get(name).ok_or_else(|| format!("{name} missing"))?;
            ensure((lo..=hi).contains(&v), || {
                format!("case {case_no}: {name}={v} outside [{lo}, {hi}]")
            })?;
        }
        let export = case.topics.to_export();
        for c in [0.1, 7.3] {
            let scaled = case
                .embeddings
                .map_vectors(case.embeddings.dimension(), |v| {
                    v.iter().map(|x| x * c).collect()
                })
                .unwrap();
            let t = export.to_topic_set(&scaled).unwrap();
            let r = report(&case, &t, c, case_no);
            for name in cosine_based {
                let d = (r.get(name).unwrap() - base.get(name).unwrap()).abs();
                worst_scale = worst_scale.max(d);
                ensure(d <= 1e-9, || {
                    format!("case {case_no}: {name} moved by {d:e} under scale {c}")
                })?;
            }
            let cents = ClusterCentroids::new(
                case.centroids
                    .iter()
                    .map(|v| v.iter().map(|x| x * c).collect())
                    .collect(),
            )
            .unwrap();
            let scaled_topics = extract_topics(&case.candidates, &cents, case.z).unwrap();
            ensure(
                argsort_columns(&scaled_topics, case.candidates.words())
                    == argsort_columns(&case.topics, case.candidates.words()),
                || format!("case {case_no}: ranking changed under centroid scale {c}"),
            )?;
        }
    }
    Ok(format!("1000 topic sets within bounds; worst change under scaling {worst_scale:.1e} (tol 1e-9); rankings identical"))
}

mod oracle {
    use super::*;

    pub fn cos(a: &[f64], b: &[f64]) -> f64 {
        let mut ab = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for i in 0..a.len() {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
            bb += b[i] * b[i];
        }
        ab / (aa.sqrt() * bb.sqrt())
    }

    pub fn top(t: &TopicSet<f64>, k: usize, z: usize) -> Vec<Vec<f64>> {
        t.topics[k]
            .words
            .iter()
            .take(z)
            .map(|w| w.vector.clone())
            .collect()
    }

    fn mean_vec(vs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; vs[0].len()];
        for v in vs {
            for i in 0..v.len() {
                out[i] += v[i];
            }
        }
        out.iter().map(|x| x / vs.len() as f64).collect()
    }

    pub fn coh(t: &TopicSet<f64>, z: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..t.k() {
            let vs = top(t, k, z);
            let mut s = 0.0;
            let mut n = 0;
            for i in 0..vs.len() {
                for j in 0..vs.len() {
                    if i < j {
                        s += cos(&vs[i], &vs[j]);
                        n += 1;
                    }
                }
            }
            total += s / n as f64;
        }
        total / t.k() as f64
    }

    pub fn weighted(t: &TopicSet<f64>, k: usize) -> Vec<f64> {
        let words = &t.topics[k].words;
        let denom: f64 = words.iter().map(|w| w.similarity + 1.0).sum();
        let mut out = vec![0.0; words[0].vector.len()];
        for w in words {
            let phi = (w.similarity + 1.0) / denom;
            for i in 0..out.len() {
                out[i] += phi * w.vector[i] / words.len() as f64;
            }
        }
        out
    }

    pub fn wess(t: &TopicSet<f64>) -> f64 {
        let mut s = 0.0;
        let mut n = 0;
        for i in 0..t.k() {
            for j in i + 1..t.k() {
                s += cos(&weighted(t, i), &weighted(t, j));
                n += 1;
            }
        }
        s / n as f64
    }

    /// Replays the documented draw scheme with a fresh generator.
    pub fn draw(
        t: &TopicSet<f64>,
        z: usize,
        seed: u64,
        r: usize,
        k: usize,
    ) -> (usize, usize, usize) {
        let kk = t.k();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((r * kk + k) as u64);
        let mut target = rng.random_range(0..kk - 1);
        if target >= k {
            target += 1;
        }
        let zt = z.min(t.topics[target].words.len());
        let zk = z.min(t.topics[k].words.len());
        let intruder = rng.random_range(0..zt);
        let replaced = rng.random_range(0..zk);
        (target, intruder, replaced)
    }

    /// (INT, ISIM, ISH) model values.
    pub fn intruders(t: &TopicSet<f64>, z: usize, seed: u64, reps: usize) -> (f64, f64, f64) {
        let (mut int, mut isim, mut ish) = (0.0, 0.0, 0.0);
        for k in 0..t.k() {
            let vs = top(t, k, z);
            for r in 0..reps {
                let (target, wi, pos) = draw(t, z, seed, r, k);
                let x = &t.topics[target].words[wi].vector;
                let mut hits = 0;
                for i in 0..vs.len() {
                    if (0..vs.len())
                        .filter(|&j| j != i)
                        .all(|j| cos(&vs[i], x) < cos(&vs[i], &vs[j]))
                    {
                        hits += 1;
                    }
                }
                int += hits as f64 / vs.len() as f64;
                isim += vs.iter().map(|v| cos(v, x)).sum::<f64>() / vs.len() as f64;
                let mut swapped = vs.clone();
                swapped[pos] = x.clone();
                ish += cos(&mean_vec(&vs), &mean_vec(&swapped));
            }
        }
        let n = (t.k() * reps) as f64;
        (int / n, isim / n, ish / n)
    }

    pub fn diversity(t: &TopicSet<f64>, z: usize) -> f64 {
        let mut seen = Vec::<String>::new();
        let mut total = 0;
        for topic in &t.topics {
            for w in topic.words.iter().take(z) {
                total += 1;
                if !seen.contains(&w.word) {
                    seen.push(w.word.clone());
                }
            }
        }
        seen.len() as f64 / total as f64
    }

    pub fn npmi(t: &TopicSet<f64>, corpus: &Corpus, z: usize, window: usize, eps: f64) -> f64 {
        let mut windows: Vec<HashSet<&str>> = Vec::new();
        for d in corpus.documents() {
            if d.tokens.len() <= window {
                windows.push(d.tokens.iter().map(String::as_str).collect());
            } else {
                for s in 0..=d.tokens.len() - window {
                    windows.push(d.tokens[s..s + window].iter().map(String::as_str).collect());
                }
            }
        }
        let n = windows.len() as f64;
        let p = |ws: &[&str]| {
            windows
                .iter()
                .filter(|w| ws.iter().all(|x| w.contains(x)))
                .count() as f64
                / n
        };
        let mut total = 0.0;
        for topic in &t.topics {
            let words: Vec<&str> = topic
                .words
                .iter()
                .take(z)
                .map(|w| w.word.as_str())
                .collect();
            let mut s = 0.0;
            let mut m = 0;
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    let (pi, pj) = (p(&[words[i]]), p(&[words[j]]));
                    let v = if pi == 0.0 || pj == 0.0 {
                        -1.0
                    } else {
                        let pij = p(&[words[i], words[j]]) + eps;
                        if pij >= 1.0 {
                            1.0
                        } else {
                            ((pij.ln() - pi.ln() - pj.ln()) / -pij.ln()).clamp(-1.0, 1.0)
                        }
                    };
                    s += v;
                    m += 1;
                }
            }
            total += s / m as f64;
        }
        total / t.topics.len() as f64
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note =
        |name: &'static str, got: f64, want: f64, tol: f64, case: usize| -> Result<(), String> {
            let d = (got - want).abs();
            let w = worst.entry(name).or_insert(0.0);
            *w = w.max(d);
            ensure(d <= tol, || {
                format!("case {case}: {name} {got} vs oracle {want} (diff {d:e} > {tol:e})")
            })
        };
    for case_no in 0..200 {
        let case = random_case(&mut rng);
        let t = &case.topics;
        let seed = rng.random::<u64>();
        let r = report(&case, t, 1.0, seed);
        note(
            "COH",
            r.get("COH").unwrap(),
            oracle::coh(t, case.z),
            1e-12,
            case_no,
        )?;
        note(
            "WESS",
            r.get("WESS").unwrap(),
            oracle::wess(t),
            1e-12,
            case_no,
        )?;
        note(
            "TOP DIV",
            topic_diversity(t, case.z).unwrap(),
            oracle::diversity(t, case.z),
            1e-12,
            case_no,
        )?;
        let (int, isim, ish) = oracle::intruders(t, case.z, seed, 50);
        note("INT", r.get("INT").unwrap(), int, 1e-9, case_no)?;
        note("ISIM", r.get("ISIM").unwrap(), isim, 1e-9, case_no)?;
        note("ISH", r.get("ISH").unwrap(), ish, 1e-9, case_no)?;
        note(
            "NPMI",
            r.get("NPMI").unwrap(),
            oracle::npmi(t, &case.corpus, case.z, 10, 1e-12),
            1e-9,
            case_no,
        )?;
        for k in 0..t.k() {
            let d = draw_intruder(t, case.z, seed, 7, k);
            ensure(
                oracle::draw(t, case.z, seed, 7, k) == (d.target_topic, d.intruder, d.replaced),
                || format!("case {case_no}: draw sequence differs"),
            )?;
        }
        let counts = WindowCounts::new(&case.corpus, case.candidates.words(), 10).unwrap();
        ensure(counts.windows() > 0, || "no windows".into())?;
    }
    let detail: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    Ok(format!(
        "200 cases; worst diffs: {} (tol 1e-12 deterministic, 1e-9 sampled/NPMI)",
        detail.join(", ")
    ))
}

fn intruder_construction() -> Outcome {
    let dim = 24;
    let unit = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let cluster = |base: usize, prefix: &str| -> Vec<(String, Vec<f64>)> {
        (0..10)
            .map(|i| {
                let mut v = unit(base);
                v[base + 1 + i] = 0.1;
                (format!("{prefix}{i}"), v)
            })
            .collect()
    };
    let a = cluster(0, "a");
    let b = cluster(12, "b");
    for i in 0..10 {
        for j in i + 1..10 {
            let s = oracle::cos(&a[i].1, &a[j].1);
            ensure(s >= 0.95, || format!("planted similarity {s} < 0.95"))?;
        }
    }
    let emb = EmbeddingSet::from_entries(dim, a.iter().chain(&b).cloned()).unwrap();
    let cands = candidates_from_embeddings(emb).unwrap();
    let topics = extract_topics(
        &cands,
        &ClusterCentroids::new(vec![unit(0), unit(12)]).unwrap(),
        10,
    )
    .unwrap();
    let intruder = unit(23);
    let int = intruder_accuracy(&topics.topics[0], &intruder, 10).unwrap();
    let isim = intruder_similarity(&topics.topics[0], &intruder, 10).unwrap();
    ensure(int == 1.0, || format!("INT = {int}, want exactly 1"))?;
    ensure(isim <= 0.05, || format!("ISIM = {isim} > 0.05"))?;
    let r = evaluate_all(
        &topics,
        &StopwordCentroid::from_vector(unit(11)),
        EvalExtras::default(),
        &EvalConfig::default(),
    )
    .unwrap();
    ensure(r.get("INT") == Some(1.0), || {
        format!("model INT = {:?}", r.get("INT"))
    })?;
    ensure(r.get("ISIM").unwrap() <= 0.05, || {
        format!("model ISIM = {:?}", r.get("ISIM"))
    })?;
    Ok(format!(
        "INT = {int} (exact), ISIM = {isim:.3} (<= 0.05); model INT {} ISIM {:.3}",
        r.get("INT").unwrap(),
        r.get("ISIM").unwrap()
    ))
}

// --- pipeline -------------------------------------------------------------

fn config(args: &[String]) -> PipelineConfig {
    use clap::Parser;
    #[derive(Parser)]
    struct P {
        #[command(flatten)]
        a: PipelineArgs,
    }
    P::try_parse_from(std::iter::once("x".to_string()).chain(args.iter().cloned()))
        .unwrap()
        .a
        .resolve()
        .unwrap()
}

fn corpus_expansion() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let w = common::world(&tmp.path().join("world"), 11);
    let out = tmp.path().join("out");
    let mut args = w.args(&out);
    args.extend(["--k".into(), "3".into(), "--z".into(), "5".into()]);
    let cfg = config(&args);
    cmd_fit(&cfg).map_err(|e| e.to_string())?;
    let cents: EmbeddingSet<f64> =
        read_embedding_set(out.join("centroids.json")).map_err(|e| e.to_string())?;
    // plant one out-of-corpus word exactly at each centroid
    let mut vocab: EmbeddingSet<f64> = read_embedding_set(&w.vocab).map_err(|e| e.to_string())?;
    let planted: Vec<String> = (0..cents.len()).map(|k| format!("planted{k}")).collect();
    for (k, p) in planted.iter().enumerate() {
        vocab
            .push(p.clone(), cents.vector(k))
            .map_err(|e| e.to_string())?;
    }
    let vocab_path = tmp.path().join("vocab_planted.json");
    write_embedding_set(&vocab, &vocab_path).map_err(|e| e.to_string())?;
    let exp_path = tmp.path().join("planted.txt");
    fs::write(&exp_path, planted.join("\n")).map_err(|e| e.to_string())?;
    let corpus_text = fs::read_to_string(&w.corpus).map_err(|e| e.to_string())?;
    ensure(
        planted.iter().all(|p| !corpus_text.contains(p.as_str())),
        || "planted word occurs in corpus".into(),
    )?;

    let mut cfg = cfg;
    cfg.vocab = Some(vocab_path);
    cfg.expand = Some(exp_path);
    cmd_topics(&cfg).map_err(|e| e.to_string())?;
    let artifact: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(TOPICS_FILE)).unwrap()).unwrap();
    for (k, p) in planted.iter().enumerate() {
        let first = artifact["topics"][k]["words"][0]["word"]
            .as_str()
            .unwrap_or("");
        ensure(first == p, || {
            format!("topic {k} starts with {first:?}, expected {p:?}")
        })?;
    }
    Ok(format!(
        "{} planted out-of-corpus words each ranked first",
        planted.len()
    ))
}

fn cleaning() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let threshold = 0.85;
    let mut removed = 0;
    for case in 0..100 {
        let dim = rng.random_range(4..=12);
        let z = rng.random_range(3..=10);
        let base: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut vectors = base.clone();
        // near-duplicates of random base words
        for _ in 0..rng.random_range(2..=8) {
            let src = &base[rng.random_range(0..base.len())];
            vectors.push(
                src.iter()
                    .map(|x| x + rng.random_range(-0.02..0.02))
                    .collect(),
            );
        }
        let entries: Vec<(String, Vec<f64>)> = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("w{i:02}"), v))
            .collect();
        let cands =
            candidates_from_embeddings(EmbeddingSet::from_entries(dim, entries).unwrap()).unwrap();
        // centroid near a duplicated word so the pair lands in the top ranks
        let anchor = cands.vector(cands.len() - 1).to_vec();
        let topics =
            extract_topics(&cands, &ClusterCentroids::new(vec![anchor]).unwrap(), z).unwrap();
        let column = topics.beta_column(0);
        for refill in [true, false] {
            let cleaned =
                clean_topic(&topics.topics[0], &column, &cands, threshold, z, refill).unwrap();
            let got: Vec<&str> = cleaned.word_list();
            for i in 0..cleaned.words.len() {
                for j in i + 1..cleaned.words.len() {
                    let s = oracle::cos(&cleaned.words[i].vector, &cleaned.words[j].vector);
                    ensure(s <= threshold + 1e-9, || {
                        format!("case {case}: pair similarity {s} above threshold")
                    })?;
                }
            }
            // greedy oracle: walk the ranking, keep a word if it is not too
            // close to any kept word
            let mut order: Vec<usize> = (0..cands.len()).collect();
            order.sort_by(|&a, &b| {
                column[b]
                    .partial_cmp(&column[a])
                    .unwrap()
                    .then_with(|| cands.word(a).cmp(cands.word(b)))
            });
            let pool = if refill { &order[..] } else { &order[..z] };
            let mut kept: Vec<usize> = Vec::new();
            for &i in pool {
                if kept.len() == z {
                    break;
                }
                if kept
                    .iter()
                    .all(|&j| oracle::cos(cands.vector(i), cands.vector(j)) <= threshold)
                {
                    kept.push(i);
                }
            }
            let want: Vec<&str> = kept.iter().map(|&i| cands.word(i)).collect();
            ensure(got == want, || {
                format!("case {case} refill={refill}: {got:?} vs oracle {want:?}")
            })?;
            if refill {
                removed += topics.topics[0]
                    .word_list()
                    .iter()
                    .filter(|w| !got.contains(w))
                    .count();
            }
        }
    }
    ensure(removed > 0, || "no near-duplicates were removed".into())?;
    Ok(format!("100 topics, {removed} near-duplicates removed, all pairs <= 0.85 + 1e-9, equal to greedy oracle"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let w = common::world(&tmp.path().join("world"), 3);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("out{run}"));
        let mut args = w.args(&out);
        args.extend(
            ["--k-range", "1..5", "--z", "5", "--seed", "42", "--expand"]
                .iter()
                .map(|s| s.to_string())
                .chain([w.expand.display().to_string()]),
        );
        cmd_run(&config(&args)).map_err(|e| e.to_string())?;
        outputs.push(out);
    }
    let files = [
        "fit.json",
        "reduction.json",
        "centroids.json",
        "topics.json",
        "metrics.json",
        "theta.csv",
        "topics.csv",
        "beta.csv",
        "metrics.csv",
    ];
    for f in files {
        let a = fs::read(outputs[0].join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(outputs[1].join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, || format!("{f} differs between runs"))?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs",
        files.len()
    ))
}

fn validation_harness() -> Outcome {
    // Four 6-word instances: five clustered words plus one orthogonal word.
    // In instances 0 and 2 the orthogonal word is the true intruder, in 1
    // and 3 a clustered word is, so every metric hits exactly [1,0,1,0].
    let words = ["c0", "c1", "c2", "c3", "c4", "odd"];
    let mut entries: Vec<(String, Vec<f64>)> = (0..5)
        .map(|i| {
            let mut v = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            v[i + 2] = 0.2;
            (format!("c{i}"), v)
        })
        .collect();
    entries.push(("odd".into(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    let emb = EmbeddingSet::from_entries(7, entries).unwrap();
    let rates = [0.9, 0.1, 0.8, 0.2];
    let instances: Vec<IntruderInstance> = (0..4)
        .map(|i| {
            let truth = if i % 2 == 0 { "odd" } else { "c0" };
            let hits = (rates[i] * 10.0f64).round() as usize;
            let other = if truth == "odd" { "c1" } else { "odd" };
            IntruderInstance {
                topic_id: format!("t{i}"),
                displayed_words: words.iter().map(|s| s.to_string()).collect(),
                true_intruder: truth.into(),
                human_selections: (0..10)
                    .map(|a| if a < hits { truth } else { other }.to_string())
                    .collect(),
            }
        })
        .collect();
    let result = validate(&instances, &emb, false).map_err(|e| e.to_string())?;
    let expected_r = pearson(&[1.0, 0.0, 1.0, 0.0], &rates).unwrap();
    let closed_form = 0.7 / 0.5f64.sqrt();
    ensure((expected_r - closed_form).abs() <= 1e-12, || {
        "pearson helper disagrees with closed form".into()
    })?;
    for style in ScoreStyle::ALL {
        let m = result.metric(style);
        ensure(
            m.accuracy_true == 2.0 / instances.len() as f64 && m.hits_true == 2,
            || format!("{style:?} accuracy_true {}", m.accuracy_true),
        )?;
        // instances 1 and 3: humans mostly chose the orthogonal word too
        ensure(
            m.accuracy_human == Some(4.0 / instances.len() as f64),
            || format!("{style:?} accuracy_human {:?}", m.accuracy_human),
        )?;
        let r = m.pearson_human.ok_or("pearson undefined")?;
        ensure((r - closed_form).abs() <= 1e-9, || {
            format!("{style:?} pearson {r} vs {closed_form}")
        })?;
    }

    // the same check through the command, from files
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inst_path = tmp.path().join("instances.jsonl");
    let lines: Vec<String> = instances
        .iter()
        .map(|i| serde_json::to_string(i).unwrap())
        .collect();
    fs::write(&inst_path, lines.join("\n")).unwrap();
    let emb_path = tmp.path().join("emb.hemb");
    write_embedding_set(&emb, &emb_path).unwrap();
    let art = cmd_validate(&ValidateOptions {
        instances: inst_path,
        embeddings: emb_path,
        out: tmp.path().join("out"),
        strict: false,
        hyphen_policy: Default::default(),
        skip_missing: false,
    })
    .map_err(|e| e.to_string())?;
    let r = art.result.metric(ScoreStyle::Int).pearson_human.unwrap();
    ensure((r - closed_form).abs() <= 1e-9, || {
        format!("command pearson {r}")
    })?;
    Ok(format!(
        "accuracies 2/4 and 4/4 exact; pearson {r:.9} = 0.7/sqrt(0.5) within 1e-9"
    ))
}

// --- data-dependent -----------------------------------------------------

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name)
        .map(PathBuf::from)
        .filter(|p| p.exists())
}

/// `EMBTOPIC_INTRUDER_INSTANCES` (JSON Lines) and
/// `EMBTOPIC_INTRUDER_EMBEDDINGS` (word embeddings for the displayed words).
fn data_intruder_correlation() -> Outcome {
    let (Some(instances), Some(embeddings)) = (
        env_path("EMBTOPIC_INTRUDER_INSTANCES"),
        env_path("EMBTOPIC_INTRUDER_EMBEDDINGS"),
    ) else {
        return Ok("SKIP: set EMBTOPIC_INTRUDER_INSTANCES and EMBTOPIC_INTRUDER_EMBEDDINGS".into());
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let art = cmd_validate(&ValidateOptions {
        instances,
        embeddings,
        out: tmp.path().to_path_buf(),
        strict: false,
        hyphen_policy: Default::default(),
        skip_missing: true,
    })
    .map_err(|e| e.to_string())?;
    let r = art
        .result
        .metric(ScoreStyle::Int)
        .pearson_human
        .ok_or("INT human correlation undefined")?;
    ensure((r - 0.728).abs() <= 0.05, || {
        format!("INT human correlation {r:.3}, expected 0.728 +- 0.05")
    })?;
    Ok(format!(
        "INT human correlation {r:.3} (target 0.728 +- 0.05) over {} instances",
        art.result.instances
    ))
}

/// `EMBTOPIC_BENCH_DIR` holding docs.hemb, vocab.hemb, stopwords.hemb,
/// corpus.txt and expansion.txt, optionally eval.hemb and k.txt.
fn data_expansion_signs() -> Outcome {
    let Some(dir) = env_path("EMBTOPIC_BENCH_DIR") else {
        return Ok("SKIP: set EMBTOPIC_BENCH_DIR".into());
    };
    let k = fs::read_to_string(dir.join("k.txt"))
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|_| "20".into());
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |expand: bool, out: &Path| -> Result<MetricReport, String> {
        let s = |p: PathBuf| p.display().to_string();
        let mut args = vec![
            "--docs".into(),
            s(dir.join("docs.hemb")),
            "--vocab".into(),
            s(dir.join("vocab.hemb")),
            "--stopwords".into(),
            s(dir.join("stopwords.hemb")),
            "--corpus".into(),
            s(dir.join("corpus.txt")),
            "--out".into(),
            s(out.to_path_buf()),
            "--k".into(),
            k.clone(),
        ];
        if dir.join("eval.hemb").exists() {
            args.extend(["--eval-embeddings".into(), s(dir.join("eval.hemb"))]);
        }
        if expand {
            args.extend(["--expand".into(), s(dir.join("expansion.txt"))]);
        }
        cmd_run(&config(&args))
            .map(|r| r.2)
            .map_err(|e| e.to_string())
    };
    let base = run(false, &tmp.path().join("base"))?;
    let exp = run(true, &tmp.path().join("exp"))?;
    let g = |r: &MetricReport, m: &str| r.get(m).unwrap_or(f64::NAN);
    let checks = [
        ("INT up", g(&exp, "INT") > g(&base, "INT")),
        ("EXPRS down", g(&exp, "EXPRS") < g(&base, "EXPRS")),
        ("TOP DIV up", g(&exp, "TOP DIV") > g(&base, "TOP DIV")),
        ("NPMI down", g(&exp, "NPMI") < g(&base, "NPMI")),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    ensure(failed.is_empty(), || {
        format!("sign pattern violated: {failed:?}")
    })?;
    Ok("expansion raises INT and diversity, lowers EXPRS and NPMI".into())
}
