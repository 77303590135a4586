//! Pipeline settings: command-line flags over an optional `key=value`
//! file over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use embtopic::clustering::Criterion;
use embtopic::metrics::{
    DEFAULT_NPMI_EPSILON, DEFAULT_NPMI_WINDOW, DEFAULT_REPETITIONS, DEFAULT_Z,
};
use embtopic::reduction::DEFAULT_TARGET_DIM;
use embtopic::topics::DEFAULT_CLEAN_THRESHOLD;
use serde::{Deserialize, Serialize};

use crate::error::{Stage, StageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Aic,
    Bic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Aic => Criterion::Aic,
            CriterionArg::Bic => Criterion::Bic,
        }
    }
}

impl FromStr for CriterionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// Inclusive K range written `lo..hi` or `lo-hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .or_else(|| s.split_once('-'))
            .ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
        let lo: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let hi: usize = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|e| format!("{b:?}: {e}"))?;
        if lo == 0 || lo > hi {
            return Err(format!("invalid K range {lo}..{hi}"));
        }
        Ok(KRange { lo, hi })
    }
}

/// Flags shared by the pipeline subcommands. Every field is optional so
/// that unset flags fall through to the config file and then the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Flat `key=value` file; keys are long flag names without dashes prefix
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Document embeddings (HEMB1 or JSON)
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// Vocabulary embeddings covering corpus and expansion words
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Stopword embeddings; excluded from candidates and used for EXPRS
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Corpus, one document per line, optional `id<TAB>` prefix
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Noun list used by --nouns-only
    #[arg(long)]
    pub nouns: Option<PathBuf>,
    /// Expansion word list
    #[arg(long)]
    pub expand: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fixed number of topics
    #[arg(long, conflicts_with = "k_range")]
    pub k: Option<usize>,
    /// Range of K to search, e.g. 2..10
    #[arg(long)]
    pub k_range: Option<KRange>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Reduced document dimension; 0 disables reduction
    #[arg(long)]
    pub reduce_dim: Option<usize>,
    /// Top words per topic
    #[arg(long)]
    pub z: Option<usize>,
    /// Intruder draws per topic
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub clean_threshold: Option<f64>,
    #[arg(long)]
    pub no_clean: bool,
    /// Do not refill slots freed by cleaning
    #[arg(long)]
    pub no_refill: bool,
    /// Restrict candidates to the --nouns list
    #[arg(long)]
    pub nouns_only: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiply the WESS pair sum by (K-1)K/2 instead of averaging
    #[arg(long)]
    pub wess_verbatim: bool,
    /// Embeddings in which to compute metrics (default: --vocab)
    #[arg(long)]
    pub eval_embeddings: Option<PathBuf>,
    /// Second embedding set for the COHPW column
    #[arg(long)]
    pub cohpw_embeddings: Option<PathBuf>,
    /// Reference corpus for NPMI (default: --corpus)
    #[arg(long)]
    pub npmi_reference: Option<PathBuf>,
    #[arg(long)]
    pub npmi_window: Option<usize>,
    #[arg(long)]
    pub npmi_epsilon: Option<f64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub docs: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub nouns: Option<PathBuf>,
    pub expand: Option<PathBuf>,
    pub out: PathBuf,
    pub k: Option<usize>,
    pub k_range: Option<KRange>,
    pub criterion: Criterion,
    pub reduce_dim: usize,
    pub z: usize,
    pub repetitions: usize,
    pub clean: bool,
    pub clean_threshold: f64,
    pub refill: bool,
    pub nouns_only: bool,
    pub seed: u64,
    pub wess_verbatim: bool,
    pub eval_embeddings: Option<PathBuf>,
    pub cohpw_embeddings: Option<PathBuf>,
    pub npmi_reference: Option<PathBuf>,
    pub npmi_window: usize,
    pub npmi_epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            docs: None,
            vocab: None,
            stopwords: None,
            corpus: None,
            nouns: None,
            expand: None,
            out: PathBuf::from("out"),
            k: None,
            k_range: None,
            criterion: Criterion::Bic,
            reduce_dim: DEFAULT_TARGET_DIM,
            z: DEFAULT_Z,
            repetitions: DEFAULT_REPETITIONS,
            clean: true,
            clean_threshold: DEFAULT_CLEAN_THRESHOLD,
            refill: true,
            nouns_only: false,
            seed: 0,
            wess_verbatim: false,
            eval_embeddings: None,
            cohpw_embeddings: None,
            npmi_reference: None,
            npmi_window: DEFAULT_NPMI_WINDOW,
            npmi_epsilon: DEFAULT_NPMI_EPSILON,
        }
    }
}

const KEYS: &[&str] = &[
    "docs",
    "vocab",
    "stopwords",
    "corpus",
    "nouns",
    "expand",
    "out",
    "k",
    "k-range",
    "criterion",
    "reduce-dim",
    "z",
    "repetitions",
    "clean-threshold",
    "no-clean",
    "no-refill",
    "nouns-only",
    "seed",
    "wess-verbatim",
    "eval-embeddings",
    "cohpw-embeddings",
    "npmi-reference",
    "npmi-window",
    "npmi-epsilon",
];

/// Parses `key=value` lines. `#` starts a comment; keys may use `-` or `_`.
/// Relative paths are resolved against the file's directory.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key {key:?}", i + 1));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key:?}", i + 1));
        }
    }
    Ok(out)
}

struct FileValues {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl FileValues {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| format!("config key {key}: {e}")))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base.join(p)
            }
        })
    }

    fn flag(&self, key: &str) -> Result<bool, String> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

impl PipelineArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, StageError> {
        let err = |e: String| StageError::usage(Stage::Config, e);
        let file = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| err(format!("cannot read {}: {e}", p.display())))?;
                FileValues {
                    values: parse_config_file(&text).map_err(err)?,
                    base: p.parent().map(Path::to_path_buf).unwrap_or_default(),
                }
            }
            None => FileValues {
                values: BTreeMap::new(),
                base: PathBuf::new(),
            },
        };
        let d = PipelineConfig::default();
        let path = |cli: &Option<PathBuf>, key: &str| cli.clone().or_else(|| file.path(key));
        macro_rules! pick {
            ($cli:expr, $key:literal, $default:expr) => {
                match $cli {
                    Some(v) => v,
                    None => file.get($key).map_err(err)?.unwrap_or($default),
                }
            };
        }
        let k = match self.k {
            Some(k) => Some(k),
            None => file.get("k").map_err(err)?,
        };
        let k_range = match self.k_range {
            Some(r) => Some(r),
            None => file.get("k-range").map_err(err)?,
        };
        let criterion: CriterionArg = pick!(self.criterion, "criterion", CriterionArg::Bic);
        let cfg = PipelineConfig {
            docs: path(&self.docs, "docs"),
            vocab: path(&self.vocab, "vocab"),
            stopwords: path(&self.stopwords, "stopwords"),
            corpus: path(&self.corpus, "corpus"),
            nouns: path(&self.nouns, "nouns"),
            expand: path(&self.expand, "expand"),
            out: path(&self.out, "out").unwrap_or(d.out),
            // a K given on the command line overrides a file range and vice versa
            k: if self.k_range.is_some() { None } else { k },
            k_range: if self.k.is_some() { None } else { k_range },
            criterion: criterion.into(),
            reduce_dim: pick!(self.reduce_dim, "reduce-dim", d.reduce_dim),
            z: pick!(self.z, "z", d.z),
            repetitions: pick!(self.repetitions, "repetitions", d.repetitions),
            clean: !(self.no_clean || file.flag("no-clean").map_err(err)?),
            clean_threshold: pick!(self.clean_threshold, "clean-threshold", d.clean_threshold),
            refill: !(self.no_refill || file.flag("no-refill").map_err(err)?),
            nouns_only: self.nouns_only || file.flag("nouns-only").map_err(err)?,
            seed: pick!(self.seed, "seed", d.seed),
            wess_verbatim: self.wess_verbatim || file.flag("wess-verbatim").map_err(err)?,
            eval_embeddings: path(&self.eval_embeddings, "eval-embeddings"),
            cohpw_embeddings: path(&self.cohpw_embeddings, "cohpw-embeddings"),
            npmi_reference: path(&self.npmi_reference, "npmi-reference"),
            npmi_window: pick!(self.npmi_window, "npmi-window", d.npmi_window),
            npmi_epsilon: pick!(self.npmi_epsilon, "npmi-epsilon", d.npmi_epsilon),
        };
        if cfg.k.is_some() && cfg.k_range.is_some() {
            return Err(err("both k and k-range set in the config file".into()));
        }
        if cfg.z < 2 {
            return Err(err(format!("z must be at least 2, got {}", cfg.z)));
        }
        if cfg.repetitions == 0 {
            return Err(err("repetitions must be positive".into()));
        }
        if !(cfg.clean_threshold > 0.0 && cfg.clean_threshold <= 1.0) {
            return Err(err(format!(
                "clean-threshold must be in (0, 1], got {}",
                cfg.clean_threshold
            )));
        }
        if cfg.nouns_only && cfg.nouns.is_none() {
            return Err(err("--nouns-only requires --nouns".into()));
        }
        Ok(cfg)
    }
}
