//! Plain-text inputs: corpora, word lists and intruder annotations.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
}

/// A tokenized document collection and its vocabulary.
///
/// Vocabulary order is first occurrence in the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vec<String>,
    vocab_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ids = HashSet::new();
        let mut vocabulary = Vec::new();
        let mut vocab_index = HashMap::new();
        for (i, d) in documents.iter().enumerate() {
            if !ids.insert(d.id.as_str()) {
                return Err(Error::Corpus {
                    line: i + 1,
                    reason: format!("duplicate document id {:?}", d.id),
                });
            }
            if d.tokens.is_empty() {
                return Err(Error::Corpus {
                    line: i + 1,
                    reason: format!("document {:?} has no tokens", d.id),
                });
            }
            for t in &d.tokens {
                if !vocab_index.contains_key(t) {
                    vocab_index.insert(t.clone(), vocabulary.len());
                    vocabulary.push(t.clone());
                }
            }
        }
        Ok(Corpus {
            documents,
            vocabulary,
            vocab_index,
        })
    }

    /// Parses one document per non-blank line with an optional `id<TAB>`
    /// prefix; documents without one get their 0-based document index as id.
    pub fn parse(text: &str) -> Result<Self> {
        let mut documents = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, body) = match line.split_once('\t') {
                Some((id, body)) => (id.trim().to_string(), body),
                None => (documents.len().to_string(), line),
            };
            let tokens: Vec<String> = body.split_whitespace().map(str::to_string).collect();
            if tokens.is_empty() {
                return Err(Error::Corpus {
                    line: lineno + 1,
                    reason: format!("document {id:?} has no tokens"),
                });
            }
            if id.is_empty() {
                return Err(Error::Corpus {
                    line: lineno + 1,
                    reason: "empty document id".into(),
                });
            }
            documents.push(Document { id, tokens });
        }
        Corpus::new(documents)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn contains_word(&self, w: &str) -> bool {
        self.vocab_index.contains_key(w)
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordListKind {
    Stopwords,
    Nouns,
    ExpansionNouns,
}

/// A non-empty, duplicate-free ordered list of words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    kind: WordListKind,
    words: Vec<String>,
    set: HashSet<String>,
}

impl WordList {
    pub fn new<I, S>(kind: WordListKind, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list = Vec::new();
        let mut set = HashSet::new();
        for w in words {
            let w = w.into();
            if !set.insert(w.clone()) {
                return Err(Error::WordList(format!("duplicate entry {w:?}")));
            }
            list.push(w);
        }
        if list.is_empty() {
            return Err(Error::WordList("list is empty".into()));
        }
        Ok(WordList {
            kind,
            words: list,
            set,
        })
    }

    /// One word per line; blank lines are skipped.
    pub fn parse(kind: WordListKind, text: &str) -> Result<Self> {
        WordList::new(kind, text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn kind(&self) -> WordListKind {
        self.kind
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, w: &str) -> bool {
        self.set.contains(w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn read_word_list(kind: WordListKind, path: impl AsRef<Path>) -> Result<WordList> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WordList::parse(kind, &text)
}

/// One word-intrusion task: the words shown, the planted intruder and the
/// word each annotator picked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntruderInstance {
    pub topic_id: String,
    pub displayed_words: Vec<String>,
    pub true_intruder: String,
    pub human_selections: Vec<String>,
}

impl IntruderInstance {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.displayed_words.len() < 3 {
            return Err(format!(
                "{} displayed words, need at least 3",
                self.displayed_words.len()
            ));
        }
        let mut seen = HashSet::new();
        for w in &self.displayed_words {
            if !seen.insert(w.as_str()) {
                return Err(format!("duplicate displayed word {w:?}"));
            }
        }
        if !seen.contains(self.true_intruder.as_str()) {
            return Err(format!(
                "true intruder {:?} is not among the displayed words",
                self.true_intruder
            ));
        }
        if let Some(s) = self
            .human_selections
            .iter()
            .find(|s| !seen.contains(s.as_str()))
        {
            return Err(format!(
                "human selection {s:?} is not among the displayed words"
            ));
        }
        Ok(())
    }

    /// Fraction of annotators who picked the true intruder.
    pub fn human_detection_rate(&self) -> Option<f64> {
        if self.human_selections.is_empty() {
            return None;
        }
        let hits = self
            .human_selections
            .iter()
            .filter(|s| **s == self.true_intruder)
            .count();
        Some(hits as f64 / self.human_selections.len() as f64)
    }

    /// Words chosen by the largest number of annotators, sorted.
    pub fn modal_selections(&self) -> Vec<&str> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in &self.human_selections {
            *counts.entry(s.as_str()).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        let mut modes: Vec<&str> = counts
            .into_iter()
            .filter(|&(_, c)| c == best)
            .map(|(w, _)| w)
            .collect();
        modes.sort_unstable();
        modes
    }
}

pub fn parse_intruder_instances(text: &str) -> Result<Vec<IntruderInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: IntruderInstance = serde_json::from_str(line).map_err(|e| Error::Instance {
            line: i + 1,
            reason: e.to_string(),
        })?;
        inst.validate().map_err(|reason| Error::Instance {
            line: i + 1,
            reason,
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn read_intruder_instances(path: impl AsRef<Path>) -> Result<Vec<IntruderInstance>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intruder_instances(&text)
}

/// How hyphenated words in annotation data are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyphenPolicy {
    /// Remove hyphenated words from each instance. Instances whose true
    /// intruder is hyphenated, or that fall below three words, are removed.
    #[default]
    DropWord,
    /// Remove every instance that shows a hyphenated word.
    DropInstance,
    Keep,
}

pub fn apply_hyphen_policy(
    instances: &[IntruderInstance],
    policy: HyphenPolicy,
) -> Vec<IntruderInstance> {
    let hyphenated = |w: &String| w.contains('-');
    instances
        .iter()
        .filter_map(|inst| match policy {
            HyphenPolicy::Keep => Some(inst.clone()),
            HyphenPolicy::DropInstance => {
                (!inst.displayed_words.iter().any(hyphenated)).then(|| inst.clone())
            }
            HyphenPolicy::DropWord => {
                if hyphenated(&inst.true_intruder) {
                    return None;
                }
                let displayed: Vec<String> = inst
                    .displayed_words
                    .iter()
                    .filter(|w| !hyphenated(w))
                    .cloned()
                    .collect();
                if displayed.len() < 3 {
                    return None;
                }
                Some(IntruderInstance {
                    topic_id: inst.topic_id.clone(),
                    displayed_words: displayed,
                    true_intruder: inst.true_intruder.clone(),
                    human_selections: inst
                        .human_selections
                        .iter()
                        .filter(|w| !hyphenated(w))
                        .cloned()
                        .collect(),
                })
            }
        })
        .collect()
}
