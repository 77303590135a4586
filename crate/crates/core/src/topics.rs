//! Candidate vocabulary construction, centroid-similarity topic extraction
//! and near-duplicate cleaning.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterCentroids;
use crate::error::{Error, Result};
use crate::io::{Corpus, EmbeddingSet, WordList};
use crate::scalar::Scalar;
use crate::vector::{centroid, cosine_with_sq_norms, dot, weighted_centroid};

pub const DEFAULT_TOP_WORDS: usize = 10;
pub const DEFAULT_CLEAN_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub in_corpus: bool,
    pub expansion: bool,
}

/// Words eligible to appear in topics, with their embeddings.
#[derive(Debug, Clone)]
pub struct CandidateVocabulary<T: Scalar> {
    embeddings: EmbeddingSet<T>,
    provenance: Vec<Provenance>,
    sq_norms: Vec<T>,
}

impl<T: Scalar> CandidateVocabulary<T> {
    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn words(&self) -> &[String] {
        self.embeddings.labels()
    }

    pub fn word(&self, i: usize) -> &str {
        self.embeddings.label(i)
    }

    pub fn vector(&self, i: usize) -> &[T] {
        self.embeddings.vector(i)
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub fn embeddings(&self) -> &EmbeddingSet<T> {
        &self.embeddings
    }

    pub fn position(&self, w: &str) -> Option<usize> {
        self.embeddings.position(w)
    }

    fn similarity(&self, a: usize, b: usize) -> T {
        cosine_with_sq_norms(
            self.vector(a),
            self.sq_norms[a],
            self.vector(b),
            self.sq_norms[b],
        )
    }
}

/// Optional filters applied when assembling candidates.
#[derive(Debug, Clone, Copy, Default)]
pub struct CandidateFilters<'a> {
    /// Keep only words on this list.
    pub nouns: Option<&'a WordList>,
    /// Words outside the corpus to add.
    pub expansion: Option<&'a WordList>,
    /// Words never to use, typically stopwords. Ignored when `nouns` is set.
    pub exclude: Option<&'a WordList>,
}

/// Corpus vocabulary, then expansion words, filtered and deduplicated.
pub fn build_candidates<T: Scalar>(
    corpus: &Corpus,
    vocab_embeddings: &EmbeddingSet<T>,
    filters: CandidateFilters<'_>,
) -> Result<CandidateVocabulary<T>> {
    let keep = |w: &str| match (filters.nouns, filters.exclude) {
        (Some(n), _) => n.contains(w),
        (None, Some(x)) => !x.contains(w),
        (None, None) => true,
    };
    let mut order: Vec<(&str, Provenance)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let corpus_words = corpus.vocabulary().iter().map(|w| (w.as_str(), false));
    let expansion_words = filters
        .expansion
        .map(|l| l.words())
        .unwrap_or_default()
        .iter()
        .map(|w| (w.as_str(), true));
    for (w, from_expansion) in corpus_words.chain(expansion_words) {
        if !keep(w) {
            continue;
        }
        let slot = *index.entry(w).or_insert_with(|| {
            order.push((w, Provenance::default()));
            order.len() - 1
        });
        if from_expansion {
            order[slot].1.expansion = true;
        } else {
            order[slot].1.in_corpus = true;
        }
    }

    let missing: Vec<&str> = order
        .iter()
        .map(|(w, _)| *w)
        .filter(|w| !vocab_embeddings.contains(w))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings {
            total: missing.len(),
            shown: missing.iter().take(10).map(|s| s.to_string()).collect(),
        });
    }
    let mut embeddings = EmbeddingSet::new(vocab_embeddings.dimension());
    for (w, _) in &order {
        embeddings.push(*w, vocab_embeddings.get(w).unwrap())?;
    }
    candidates_from(embeddings, order.into_iter().map(|(_, p)| p).collect())
}

/// Wraps an embedding set directly as candidates, all flagged in-corpus.
pub fn candidates_from_embeddings<T: Scalar>(
    embeddings: EmbeddingSet<T>,
) -> Result<CandidateVocabulary<T>> {
    let n = embeddings.len();
    candidates_from(
        embeddings,
        vec![
            Provenance {
                in_corpus: true,
                expansion: false
            };
            n
        ],
    )
}

fn candidates_from<T: Scalar>(
    embeddings: EmbeddingSet<T>,
    provenance: Vec<Provenance>,
) -> Result<CandidateVocabulary<T>> {
    let sq_norms: Vec<T> = (0..embeddings.len())
        .map(|i| dot(embeddings.vector(i), embeddings.vector(i)))
        .collect();
    if let Some(i) = sq_norms.iter().position(|&n| n == T::zero()) {
        return Err(Error::ZeroCandidate(embeddings.label(i).to_string()));
    }
    Ok(CandidateVocabulary {
        embeddings,
        provenance,
        sq_norms,
    })
}

/// One ranked topic word.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicWord<T> {
    pub word: String,
    /// Cosine similarity to the cluster centroid.
    pub similarity: T,
    pub phi: T,
    pub vector: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic<T> {
    pub id: usize,
    pub words: Vec<TopicWord<T>>,
    /// `(1/Z) sum phi_i w_i` over the top words.
    pub weighted_centroid: Vec<T>,
    /// Plain mean of the top word vectors.
    pub centroid: Vec<T>,
    /// Set when cleaning ran out of candidates before reaching `Z` words.
    pub exhausted: bool,
}

impl<T: Scalar> Topic<T> {
    /// Builds a topic from `(word, similarity, vector)` in rank order,
    /// deriving weights and both centroids.
    pub fn from_ranked(
        id: usize,
        ranked: Vec<(String, T, Vec<T>)>,
        exhausted: bool,
    ) -> Result<Self> {
        if ranked.is_empty() {
            return Err(Error::EmptyInput);
        }
        let sims: Vec<T> = ranked.iter().map(|r| r.1).collect();
        let phi = phi_weights(&sims);
        let vectors: Vec<&[T]> = ranked.iter().map(|r| r.2.as_slice()).collect();
        let weighted = weighted_centroid(&vectors, &phi)?;
        let plain = centroid(&vectors)?;
        let words = ranked
            .into_iter()
            .zip(phi)
            .map(|((word, similarity, vector), phi)| TopicWord {
                word,
                similarity,
                phi,
                vector,
            })
            .collect();
        Ok(Topic {
            id,
            words,
            weighted_centroid: weighted,
            centroid: plain,
            exhausted,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word_list(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.word.as_str()).collect()
    }

    /// The first `min(z, len)` word vectors.
    pub fn top_vectors(&self, z: usize) -> Vec<&[T]> {
        self.words
            .iter()
            .take(z)
            .map(|w| w.vector.as_slice())
            .collect()
    }
}

/// `phi_i = (s_i + 1) / sum_j (s_j + 1)`; uniform if every shifted value is 0.
pub fn phi_weights<T: Scalar>(similarities: &[T]) -> Vec<T> {
    let shifted: Vec<T> = similarities
        .iter()
        .map(|&s| (s + T::one()).max(T::zero()))
        .collect();
    let total: T = shifted.iter().copied().sum();
    if total > T::zero() {
        shifted.iter().map(|&s| s / total).collect()
    } else {
        vec![T::one() / T::count(similarities.len()); similarities.len()]
    }
}

/// All topics plus the full candidate-by-topic similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSet<T> {
    pub topics: Vec<Topic<T>>,
    words: Vec<String>,
    /// `|candidates| x K`, row-major.
    beta: Vec<T>,
}

impl<T> TopicSet<T> {
    /// A topic set without a similarity matrix, e.g. reloaded from disk.
    pub fn from_topics(topics: Vec<Topic<T>>) -> Self {
        TopicSet {
            topics,
            words: Vec::new(),
            beta: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.topics.len()
    }

    pub fn beta_words(&self) -> &[String] {
        &self.words
    }
}

impl<T: Scalar> TopicSet<T> {
    /// Similarity of every candidate to topic `k`, in candidate order.
    pub fn beta_column(&self, k: usize) -> Vec<T> {
        let kk = self.k();
        (0..self.words.len())
            .map(|i| self.beta[i * kk + k])
            .collect()
    }

    /// Column `k` shifted by one and normalised to sum to one.
    pub fn beta_distribution(&self, k: usize) -> Vec<T> {
        phi_weights(&self.beta_column(k))
    }

    /// Replaces every topic word's vector with its vector in `embeddings`
    /// and recomputes the centroids. Used to score topics under a different
    /// embedding model.
    pub fn reembed(&self, embeddings: &EmbeddingSet<T>) -> Result<Self> {
        let topics = self
            .topics
            .iter()
            .map(|t| {
                let ranked = t
                    .words
                    .iter()
                    .map(|w| {
                        let v = embeddings
                            .get(&w.word)
                            .ok_or_else(|| Error::MissingWord(w.word.clone()))?;
                        Ok((w.word.clone(), w.similarity, v.to_vec()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Topic::from_ranked(t.id, ranked, t.exhausted)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TopicSet {
            topics,
            words: self.words.clone(),
            beta: self.beta.clone(),
        })
    }

    pub fn to_export(&self) -> TopicsExport {
        TopicsExport {
            topics: self
                .topics
                .iter()
                .map(|t| TopicExport {
                    id: t.id,
                    exhausted: t.exhausted,
                    words: t
                        .words
                        .iter()
                        .map(|w| WordExport {
                            word: w.word.clone(),
                            similarity: w.similarity.as_f64(),
                            phi: w.phi.as_f64(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// `topic_id,rank,word,similarity,phi`, rank starting at 1.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["topic_id", "rank", "word", "similarity", "phi"])?;
        for t in &self.topics {
            for (r, w) in t.words.iter().enumerate() {
                out.write_record([
                    t.id.to_string(),
                    (r + 1).to_string(),
                    w.word.clone(),
                    w.similarity.as_f64().to_string(),
                    w.phi.as_f64().to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `word,topic_0,...` with one row per candidate.
    pub fn write_beta_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["word".to_string()];
        header.extend((0..self.k()).map(|k| format!("topic_{k}")));
        out.write_record(&header)?;
        let kk = self.k();
        for (i, word) in self.words.iter().enumerate() {
            let mut rec = vec![word.clone()];
            rec.extend(
                self.beta[i * kk..(i + 1) * kk]
                    .iter()
                    .map(|v| v.as_f64().to_string()),
            );
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Serializable topic listing (words, similarities and weights; no vectors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsExport {
    pub topics: Vec<TopicExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicExport {
    pub id: usize,
    pub exhausted: bool,
    pub words: Vec<WordExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordExport {
    pub word: String,
    pub similarity: f64,
    pub phi: f64,
}

impl TopicsExport {
    /// Rebuilds a [`TopicSet`] by looking up every word in `embeddings`.
    pub fn to_topic_set<T: Scalar>(&self, embeddings: &EmbeddingSet<T>) -> Result<TopicSet<T>> {
        let topics = self
            .topics
            .iter()
            .map(|t| {
                let ranked = t
                    .words
                    .iter()
                    .map(|w| {
                        let v = embeddings
                            .get(&w.word)
                            .ok_or_else(|| Error::MissingWord(w.word.clone()))?;
                        Ok((w.word.clone(), T::lit(w.similarity), v.to_vec()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Topic::from_ranked(t.id, ranked, t.exhausted)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TopicSet::from_topics(topics))
    }
}

/// Descending similarity, ascending word on ties.
fn rank_order<T: Scalar>(sims: &[T], words: &[String]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sims.len()).collect();
    idx.sort_by(|&a, &b| {
        sims[b]
            .partial_cmp(&sims[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| words[a].cmp(&words[b]))
    });
    idx
}

/// Ranks every candidate against every centroid and keeps the top `z`.
pub fn extract_topics<T: Scalar>(
    candidates: &CandidateVocabulary<T>,
    centroids: &ClusterCentroids<T>,
    z: usize,
) -> Result<TopicSet<T>> {
    let n = candidates.len();
    if z == 0 || z > n {
        return Err(Error::Parameter(format!("Z={z} must be in 1..={n}")));
    }
    if centroids.dim() != candidates.embeddings.dimension() {
        return Err(Error::Dimensions {
            left: candidates.embeddings.dimension(),
            right: centroids.dim(),
        });
    }
    let k = centroids.k();
    let c_norms: Vec<T> = centroids.iter().map(|c| dot(c, c)).collect();
    if c_norms.iter().any(|&v| v == T::zero()) {
        return Err(Error::ZeroVector);
    }
    let beta: Vec<T> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let v = candidates.vector(i);
            let nv = candidates.sq_norms[i];
            let c_norms = &c_norms;
            centroids
                .iter()
                .enumerate()
                .map(move |(j, c)| cosine_with_sq_norms(v, nv, c, c_norms[j]))
        })
        .collect();

    let words = candidates.words();
    let topics = (0..k)
        .map(|j| {
            let column: Vec<T> = (0..n).map(|i| beta[i * k + j]).collect();
            let order = rank_order(&column, words);
            let ranked = order[..z]
                .iter()
                .map(|&i| (words[i].clone(), column[i], candidates.vector(i).to_vec()))
                .collect();
            Topic::from_ranked(j, ranked, false)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TopicSet {
        topics,
        words: words.to_vec(),
        beta,
    })
}

/// Removes near-duplicate words from a topic.
///
/// Pairs among the current top `z` are scanned in rank order; whenever two
/// words are more similar than `threshold`, the lower-ranked one is dropped
/// and, if `refill` is set, the next candidate from `column` takes its
/// place. The scan repeats until no pair exceeds the threshold.
pub fn clean_topic<T: Scalar>(
    topic: &Topic<T>,
    column: &[T],
    candidates: &CandidateVocabulary<T>,
    threshold: T,
    z: usize,
    refill: bool,
) -> Result<Topic<T>> {
    if column.len() != candidates.len() {
        return Err(Error::Length(format!(
            "similarity column has {} rows, {} candidates",
            column.len(),
            candidates.len()
        )));
    }
    if !(threshold > T::zero() && threshold <= T::one()) {
        return Err(Error::Parameter(format!(
            "threshold {threshold} not in (0, 1]"
        )));
    }
    let order = rank_order(column, candidates.words());
    let mut pool = order.into_iter();
    let mut current: Vec<usize> = pool.by_ref().take(z).collect();
    'scan: loop {
        for a in 0..current.len() {
            for b in a + 1..current.len() {
                if candidates.similarity(current[a], current[b]) > threshold {
                    current.remove(b);
                    if refill {
                        if let Some(next) = pool.next() {
                            current.push(next);
                        }
                    }
                    continue 'scan;
                }
            }
        }
        break;
    }
    let exhausted = current.len() < z;
    let ranked = current
        .iter()
        .map(|&i| {
            (
                candidates.word(i).to_string(),
                column[i],
                candidates.vector(i).to_vec(),
            )
        })
        .collect();
    Topic::from_ranked(topic.id, ranked, exhausted)
}

impl<T: Scalar> TopicSet<T> {
    /// Cleans every topic; requires the similarity matrix from extraction.
    pub fn cleaned(
        &self,
        candidates: &CandidateVocabulary<T>,
        threshold: T,
        z: usize,
        refill: bool,
    ) -> Result<Self> {
        if self.words.as_slice() != candidates.words() {
            return Err(Error::Length(
                "topic set was not extracted from these candidates".into(),
            ));
        }
        let topics = self
            .topics
            .iter()
            .enumerate()
            .map(|(k, t)| clean_topic(t, &self.beta_column(k), candidates, threshold, z, refill))
            .collect::<Result<Vec<_>>>()?;
        Ok(TopicSet {
            topics,
            words: self.words.clone(),
            beta: self.beta.clone(),
        })
    }
}

/// Words of `topics` that are not in `corpus`.
pub fn out_of_corpus_words<'a, T: Scalar>(
    topics: &'a TopicSet<T>,
    corpus: &Corpus,
) -> HashSet<&'a str> {
    topics
        .topics
        .iter()
        .flat_map(|t| t.words.iter().map(|w| w.word.as_str()))
        .filter(|w| !corpus.contains_word(w))
        .collect()
}
