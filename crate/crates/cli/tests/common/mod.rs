//! Synthetic inputs shared by the CLI test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use embtopic::io::{write_embedding_set, EmbeddingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const DIM: usize = 16;
pub const TOPICS: usize = 3;
pub const DOCS_PER_TOPIC: usize = 20;
pub const WORDS_PER_TOPIC: usize = 12;

pub struct World {
    pub dir: PathBuf,
    pub docs: PathBuf,
    pub vocab: PathBuf,
    pub stopwords: PathBuf,
    pub corpus: PathBuf,
    pub nouns: PathBuf,
    pub expand: PathBuf,
    /// Planted topic of every document, in file order.
    pub labels: Vec<usize>,
}

pub fn direction(t: usize) -> Vec<f64> {
    let mut v = vec![0.0; DIM];
    v[t] = 1.0;
    v[TOPICS + t] = 0.3;
    v
}

fn noisy(rng: &mut ChaCha8Rng, base: &[f64], sigma: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sigma).unwrap();
    base.iter().map(|b| b + n.sample(rng)).collect()
}

pub fn topic_word(t: usize, i: usize) -> String {
    format!("t{t}w{i:02}")
}

/// Writes a three-topic corpus with matching embeddings into `dir`.
pub fn world(dir: &Path, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stop_dir = vec![0.2; DIM];
    stop_dir[DIM - 1] = 1.0;
    let stop: Vec<String> = ["the", "a", "of", "and", "to", "in"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let general: Vec<String> = (0..8).map(|i| format!("gen{i}")).collect();

    let mut vocab: Vec<(String, Vec<f64>)> = Vec::new();
    for t in 0..TOPICS {
        for i in 0..WORDS_PER_TOPIC {
            vocab.push((topic_word(t, i), noisy(&mut rng, &direction(t), 0.25)));
        }
    }
    for w in &general {
        let base: Vec<f64> = (0..DIM).map(|_| rng.random_range(-0.5..0.5)).collect();
        vocab.push((w.clone(), base));
    }
    for t in 0..TOPICS {
        for i in 0..4 {
            vocab.push((format!("exp{t}_{i}"), noisy(&mut rng, &direction(t), 0.25)));
        }
    }
    let stop_vecs: Vec<(String, Vec<f64>)> = stop
        .iter()
        .map(|w| (w.clone(), noisy(&mut rng, &stop_dir, 0.05)))
        .collect();
    vocab.extend(stop_vecs.iter().cloned());

    let mut lines = Vec::new();
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    for d in 0..TOPICS * DOCS_PER_TOPIC {
        let t = d % TOPICS;
        let mut toks: Vec<String> = Vec::new();
        for j in 0..15 {
            let w = match j % 5 {
                0 => stop[rng.random_range(0..stop.len())].clone(),
                1 => general[rng.random_range(0..general.len())].clone(),
                _ => topic_word(t, rng.random_range(0..WORDS_PER_TOPIC)),
            };
            toks.push(w);
        }
        let id = format!("doc{d:03}");
        lines.push(format!("{id}\t{}", toks.join(" ")));
        docs.push((id, noisy(&mut rng, &direction(t), 0.05)));
        labels.push(t);
    }

    let p = |n: &str| dir.join(n);
    fs::create_dir_all(dir).unwrap();
    write_embedding_set(
        &EmbeddingSet::from_entries(DIM, docs).unwrap(),
        p("docs.hemb"),
    )
    .unwrap();
    write_embedding_set(
        &EmbeddingSet::from_entries(DIM, vocab).unwrap(),
        p("vocab.hemb"),
    )
    .unwrap();
    write_embedding_set(
        &EmbeddingSet::from_entries(DIM, stop_vecs).unwrap(),
        p("stopwords.hemb"),
    )
    .unwrap();
    fs::write(p("corpus.txt"), lines.join("\n") + "\n").unwrap();
    let nouns: Vec<String> = (0..TOPICS)
        .flat_map(|t| {
            (0..WORDS_PER_TOPIC)
                .step_by(2)
                .map(move |i| topic_word(t, i))
        })
        .chain((0..TOPICS).flat_map(|t| (0..4).map(move |i| format!("exp{t}_{i}"))))
        .collect();
    fs::write(p("nouns.txt"), nouns.join("\n") + "\n").unwrap();
    let exp: Vec<String> = (0..TOPICS)
        .flat_map(|t| (0..4).map(move |i| format!("exp{t}_{i}")))
        .collect();
    fs::write(p("expansion.txt"), exp.join("\n") + "\n").unwrap();

    World {
        dir: dir.to_path_buf(),
        docs: p("docs.hemb"),
        vocab: p("vocab.hemb"),
        stopwords: p("stopwords.hemb"),
        corpus: p("corpus.txt"),
        nouns: p("nouns.txt"),
        expand: p("expansion.txt"),
        labels,
    }
}

impl World {
    /// Pipeline flags pointing at this world's files.
    pub fn args(&self, out: &Path) -> Vec<String> {
        let s = |p: &Path| p.display().to_string();
        vec![
            "--docs".into(),
            s(&self.docs),
            "--vocab".into(),
            s(&self.vocab),
            "--stopwords".into(),
            s(&self.stopwords),
            "--corpus".into(),
            s(&self.corpus),
            "--out".into(),
            s(out),
        ]
    }
}

/// Fraction of documents whose cluster's majority label matches their own.
pub fn purity(assign: &[usize], labels: &[usize], k: usize) -> f64 {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; classes]; k];
    for (&a, &l) in assign.iter().zip(labels) {
        table[a][l] += 1;
    }
    table
        .iter()
        .map(|row| row.iter().max().copied().unwrap_or(0))
        .sum::<usize>() as f64
        / labels.len() as f64
}
