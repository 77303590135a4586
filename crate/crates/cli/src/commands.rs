//! The `fit`, `topics`, `eval` and `validate` stages.

use std::fs;
use std::path::{Path, PathBuf};

use embtopic::clustering::{
    fit_gmm_with, original_space_centroids, select_k_with, ClusterCentroids, Criterion, GmmModel,
    GmmOptions, KScore,
};
use embtopic::io::{
    apply_hyphen_policy, read_corpus, read_embedding_set, read_intruder_instances, read_word_list,
    write_embedding_set, EmbeddingSet, HyphenPolicy, WordList, WordListKind,
};
use embtopic::metrics::{evaluate_all, EvalConfig, EvalExtras, MetricReport, WessMode};
use embtopic::reduction::{fit_reduction, transform};
use embtopic::topics::{build_candidates, extract_topics, CandidateFilters, TopicExport};
use embtopic::validation::{missing_words, validate, ValidationResult};
use embtopic::vector::stopword_centroid;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cache::{DirLock, KeyBuilder};
use crate::config::{KRange, PipelineConfig};
use crate::error::{AtStage, Stage, StageError};

pub const FIT_FILE: &str = "fit.json";
pub const THETA_FILE: &str = "theta.csv";
pub const CENTROIDS_FILE: &str = "centroids.json";
pub const REDUCTION_FILE: &str = "reduction.json";
pub const TOPICS_FILE: &str = "topics.json";
pub const TOPICS_CSV: &str = "topics.csv";
pub const BETA_CSV: &str = "beta.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const VALIDATION_CSV: &str = "validation.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub cache_key: String,
    pub k: usize,
    pub reduce_dim: usize,
    /// Present when K was chosen by a criterion sweep.
    pub criterion: Option<Criterion>,
    pub selection: Option<Vec<KScore>>,
    pub model: GmmModel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsArtifact {
    pub cache_key: String,
    pub fit_key: String,
    pub candidates: usize,
    pub expansion_candidates: usize,
    pub topics: Vec<TopicExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub topics_key: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationArtifact {
    pub hyphen_policy: HyphenPolicy,
    pub dropped_by_hyphen_policy: usize,
    pub dropped_missing_embeddings: usize,
    #[serde(flatten)]
    pub result: ValidationResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitSummary {
    pub k: usize,
    pub cache_hit: bool,
    pub key: String,
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str, stage: Stage) -> Result<&'a Path, StageError> {
    p.as_deref()
        .ok_or_else(|| StageError::usage(stage, format!("missing required --{flag}")))
}

fn read_embeddings(p: &Path) -> Result<EmbeddingSet<f64>, StageError> {
    read_embedding_set(p).at(Stage::EmbedIo)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), StageError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| {
            StageError::internal(
                Stage::Output,
                anyhow::anyhow!("cannot write {}: {e}", path.display()),
            )
        })
}

fn write_json<S: Serialize>(path: &Path, v: &S) -> Result<(), StageError> {
    let mut text =
        serde_json::to_string_pretty(v).map_err(|e| StageError::internal(Stage::Output, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_csv<E: Into<anyhow::Error>>(
    path: &Path,
    f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
) -> Result<(), StageError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| StageError::internal(Stage::Output, e))?;
    write_bytes(path, &buf)
}

fn read_json<D: DeserializeOwned>(path: &Path) -> Result<Option<D>, StageError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| {
            StageError::usage(
                Stage::Cache,
                format!("cannot parse {}: {e}", path.display()),
            )
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(StageError::internal(Stage::Cache, e)),
    }
}

fn gmm_options() -> GmmOptions {
    GmmOptions::default()
}

pub fn fit_key(cfg: &PipelineConfig) -> Result<String, StageError> {
    let docs = require(&cfg.docs, "docs", Stage::EmbedIo)?;
    Ok(KeyBuilder::new("fit")
        .file("docs", Some(docs))?
        .value("k", &cfg.k)
        .value("k_range", &cfg.k_range)
        .value("criterion", &cfg.criterion)
        .value("reduce_dim", &cfg.reduce_dim)
        .value("seed", &cfg.seed)
        .value("gmm", &gmm_options())
        .finish())
}

pub fn topics_key(cfg: &PipelineConfig, fit_key: &str) -> Result<String, StageError> {
    Ok(KeyBuilder::new("topics")
        .text("fit", fit_key)
        .file("vocab", cfg.vocab.as_deref())?
        .file("corpus", cfg.corpus.as_deref())?
        .file("stopwords", cfg.stopwords.as_deref())?
        .file("nouns", cfg.nouns.as_deref().filter(|_| cfg.nouns_only))?
        .file("expand", cfg.expand.as_deref())?
        .value("z", &cfg.z)
        .value("clean", &cfg.clean)
        .value("clean_threshold", &cfg.clean_threshold)
        .value("refill", &cfg.refill)
        .value("nouns_only", &cfg.nouns_only)
        .finish())
}

/// Reduces the document embeddings, fits the mixture (or sweeps K) and
/// stores the model, the document-topic matrix and the centroids.
pub fn cmd_fit(cfg: &PipelineConfig) -> Result<FitSummary, StageError> {
    let _lock = DirLock::acquire(&cfg.out)?;
    fit_stage(cfg)
}

fn fit_stage(cfg: &PipelineConfig) -> Result<FitSummary, StageError> {
    let docs_path = require(&cfg.docs, "docs", Stage::EmbedIo)?;
    if cfg.k.is_none() && cfg.k_range.is_none() {
        return Err(StageError::usage(
            Stage::Config,
            "one of --k or --k-range is required",
        ));
    }
    let key = fit_key(cfg)?;
    let out = &cfg.out;
    if let Some(prev) = read_json::<FitArtifact>(&out.join(FIT_FILE))? {
        if prev.cache_key == key
            && out.join(THETA_FILE).exists()
            && out.join(CENTROIDS_FILE).exists()
        {
            return Ok(FitSummary {
                k: prev.k,
                cache_hit: true,
                key,
            });
        }
    }

    let docs = read_embeddings(docs_path)?;
    let reduced = if cfg.reduce_dim == 0 {
        let _ = fs::remove_file(out.join(REDUCTION_FILE));
        docs.clone()
    } else {
        let model = fit_reduction(&docs, cfg.reduce_dim).at(Stage::Reduction)?;
        write_bytes(
            &out.join(REDUCTION_FILE),
            model.to_json().at(Stage::Reduction)?.as_bytes(),
        )?;
        transform(&model, &docs).at(Stage::Reduction)?
    };
    let opts = gmm_options();
    let (k, selection) = match (cfg.k, cfg.k_range) {
        (Some(k), _) => (k, None),
        (None, Some(KRange { lo, hi })) => {
            let (k, scores) = select_k_with(&reduced, lo..=hi, cfg.criterion, cfg.seed, &opts)
                .at(Stage::Clustering)?;
            (k, Some(scores))
        }
        (None, None) => unreachable!(),
    };
    // the sweep fits each K with seed + K; refit the winner the same way
    let seed = if selection.is_some() {
        cfg.seed.wrapping_add(k as u64)
    } else {
        cfg.seed
    };
    let (model, theta) = fit_gmm_with(&reduced, k, seed, &opts).at(Stage::Clustering)?;
    let centroids = original_space_centroids(&theta, &docs).at(Stage::Clustering)?;

    write_csv(&out.join(THETA_FILE), |b| theta.write_csv(b))?;
    write_embedding_set(&centroids.to_embedding_set(), out.join(CENTROIDS_FILE))
        .at(Stage::Output)?;
    write_json(
        &out.join(FIT_FILE),
        &FitArtifact {
            cache_key: key.clone(),
            k,
            reduce_dim: cfg.reduce_dim,
            criterion: selection.as_ref().map(|_| cfg.criterion),
            selection,
            model,
        },
    )?;
    Ok(FitSummary {
        k,
        cache_hit: false,
        key,
    })
}

fn load_fit(cfg: &PipelineConfig) -> Result<FitArtifact, StageError> {
    let fit: FitArtifact = read_json(&cfg.out.join(FIT_FILE))?.ok_or_else(|| {
        StageError::usage(
            Stage::Cache,
            format!("no fit in {}; run `embtopic fit` first", cfg.out.display()),
        )
    })?;
    if fit.cache_key != fit_key(cfg)? {
        return Err(StageError::usage(
            Stage::Cache,
            format!(
                "fit in {} is stale for the current inputs or settings; rerun `embtopic fit`",
                cfg.out.display()
            ),
        ));
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicsSummary {
    pub k: usize,
    pub candidates: usize,
    pub exhausted: usize,
}

/// Builds candidates, ranks them against the fitted centroids and
/// optionally cleans near-duplicates.
pub fn cmd_topics(cfg: &PipelineConfig) -> Result<TopicsSummary, StageError> {
    let _lock = DirLock::acquire(&cfg.out)?;
    topics_stage(cfg)
}

fn topics_stage(cfg: &PipelineConfig) -> Result<TopicsSummary, StageError> {
    let fit = load_fit(cfg)?;
    let vocab = read_embeddings(require(&cfg.vocab, "vocab", Stage::EmbedIo)?)?;
    let corpus = read_corpus(require(&cfg.corpus, "corpus", Stage::EmbedIo)?).at(Stage::EmbedIo)?;
    let stop_list = match &cfg.stopwords {
        Some(p) => Some(
            WordList::new(
                WordListKind::Stopwords,
                read_embeddings(p)?.labels().iter().cloned(),
            )
            .at(Stage::EmbedIo)?,
        ),
        None => None,
    };
    let nouns = match (&cfg.nouns, cfg.nouns_only) {
        (Some(p), true) => Some(read_word_list(WordListKind::Nouns, p).at(Stage::EmbedIo)?),
        _ => None,
    };
    let expansion = match &cfg.expand {
        Some(p) => Some(read_word_list(WordListKind::ExpansionNouns, p).at(Stage::EmbedIo)?),
        None => None,
    };
    let filters = CandidateFilters {
        nouns: nouns.as_ref(),
        expansion: expansion.as_ref(),
        exclude: stop_list.as_ref(),
    };
    let candidates = build_candidates(&corpus, &vocab, filters).at(Stage::TopicExtraction)?;
    let centroid_set: EmbeddingSet<f64> =
        read_embedding_set(cfg.out.join(CENTROIDS_FILE)).at(Stage::Cache)?;
    let centroids = ClusterCentroids::new(
        (0..centroid_set.len())
            .map(|i| centroid_set.vector(i).to_vec())
            .collect(),
    )
    .at(Stage::Cache)?;
    if centroids.k() != fit.k {
        return Err(StageError::usage(
            Stage::Cache,
            "centroid file does not match fit.json; rerun `embtopic fit`",
        ));
    }
    let mut topics = extract_topics(&candidates, &centroids, cfg.z).at(Stage::TopicExtraction)?;
    if cfg.clean {
        topics = topics
            .cleaned(&candidates, cfg.clean_threshold, cfg.z, cfg.refill)
            .at(Stage::TopicExtraction)?;
    }

    write_csv(&cfg.out.join(TOPICS_CSV), |b| topics.write_csv(b))?;
    write_csv(&cfg.out.join(BETA_CSV), |b| topics.write_beta_csv(b))?;
    write_json(
        &cfg.out.join(TOPICS_FILE),
        &TopicsArtifact {
            cache_key: topics_key(cfg, &fit.cache_key)?,
            fit_key: fit.cache_key,
            candidates: candidates.len(),
            expansion_candidates: (0..candidates.len())
                .filter(|&i| {
                    candidates.provenance(i).expansion && !candidates.provenance(i).in_corpus
                })
                .count(),
            topics: topics.to_export().topics,
        },
    )?;
    Ok(TopicsSummary {
        k: topics.k(),
        candidates: candidates.len(),
        exhausted: topics.topics.iter().filter(|t| t.exhausted).count(),
    })
}

fn short_hash(path: &Path) -> Result<String, StageError> {
    Ok(KeyBuilder::new("id")
        .file("embeddings", Some(path))?
        .finish()[..16]
        .to_string())
}

/// Scores the current topics with every metric.
pub fn cmd_eval(cfg: &PipelineConfig) -> Result<MetricReport, StageError> {
    let _lock = DirLock::acquire(&cfg.out)?;
    eval_stage(cfg)
}

fn eval_stage(cfg: &PipelineConfig) -> Result<MetricReport, StageError> {
    let fit = load_fit(cfg)?;
    let artifact: TopicsArtifact = read_json(&cfg.out.join(TOPICS_FILE))?.ok_or_else(|| {
        StageError::usage(
            Stage::Cache,
            format!(
                "no topics in {}; run `embtopic topics` first",
                cfg.out.display()
            ),
        )
    })?;
    if artifact.cache_key != topics_key(cfg, &fit.cache_key)? {
        return Err(StageError::usage(
            Stage::Cache,
            "topics are stale for the current inputs or settings; rerun `embtopic topics`",
        ));
    }
    let emb_path = cfg
        .eval_embeddings
        .as_deref()
        .or(cfg.vocab.as_deref())
        .ok_or_else(|| {
            StageError::usage(
                Stage::EmbedIo,
                "missing required --vocab or --eval-embeddings",
            )
        })?;
    let embeddings = read_embeddings(emb_path)?;
    let stopwords = read_embeddings(require(&cfg.stopwords, "stopwords", Stage::EmbedIo)?)?;
    let psi = stopword_centroid(&stopwords).at(Stage::Metrics)?;
    let reference = match cfg.npmi_reference.as_deref().or(cfg.corpus.as_deref()) {
        Some(p) => Some(read_corpus(p).at(Stage::EmbedIo)?),
        None => None,
    };
    let cohpw = match &cfg.cohpw_embeddings {
        Some(p) => Some(read_embeddings(p)?),
        None => None,
    };
    let export = embtopic::topics::TopicsExport {
        topics: artifact.topics,
    };
    let topics = export.to_topic_set(&embeddings).at(Stage::Metrics)?;
    let eval = EvalConfig {
        z: cfg.z,
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        npmi_window: cfg.npmi_window,
        npmi_epsilon: cfg.npmi_epsilon,
        wess_mode: if cfg.wess_verbatim {
            WessMode::Verbatim
        } else {
            WessMode::PairMean
        },
        embedding_id: Some(format!("sha256:{}", short_hash(emb_path)?)),
    };
    let extras = EvalExtras {
        reference: reference.as_ref(),
        pairwise_embeddings: cohpw.as_ref(),
    };
    let report = evaluate_all(&topics, &psi, extras, &eval).at(Stage::Metrics)?;
    write_csv(&cfg.out.join(METRICS_CSV), |b| report.write_csv(b))?;
    write_json(
        &cfg.out.join(METRICS_FILE),
        &MetricsArtifact {
            topics_key: artifact.cache_key,
            report: report.clone(),
        },
    )?;
    Ok(report)
}

/// `fit`, `topics` and `eval` in sequence under one lock.
pub fn cmd_run(
    cfg: &PipelineConfig,
) -> Result<(FitSummary, TopicsSummary, MetricReport), StageError> {
    let _lock = DirLock::acquire(&cfg.out)?;
    let fit = fit_stage(cfg)?;
    let topics = topics_stage(cfg)?;
    let report = eval_stage(cfg)?;
    Ok((fit, topics, report))
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub instances: PathBuf,
    pub embeddings: PathBuf,
    pub out: PathBuf,
    pub strict: bool,
    pub hyphen_policy: HyphenPolicy,
    /// Drop instances with words lacking embeddings instead of failing.
    pub skip_missing: bool,
}

/// Runs the intruder-identification protocol on annotated instances.
pub fn cmd_validate(opts: &ValidateOptions) -> Result<ValidationArtifact, StageError> {
    let _lock = DirLock::acquire(&opts.out)?;
    let raw = read_intruder_instances(&opts.instances).at(Stage::EmbedIo)?;
    let embeddings = read_embeddings(&opts.embeddings)?;
    let kept = apply_hyphen_policy(&raw, opts.hyphen_policy);
    let dropped_hyphen = raw.len() - kept.len();
    let (usable, dropped_missing) = if opts.skip_missing {
        let usable: Vec<_> = kept
            .iter()
            .filter(|i| missing_words(std::slice::from_ref(*i), &embeddings).is_empty())
            .cloned()
            .collect();
        let n = kept.len() - usable.len();
        (usable, n)
    } else {
        let missing = missing_words(&kept, &embeddings);
        if !missing.is_empty() {
            return Err(StageError::usage(
                Stage::Validation,
                format!(
                    "{} displayed words lack embeddings, e.g. {:?}; pass --skip-missing to drop those instances",
                    missing.len(),
                    &missing[..missing.len().min(10)]
                ),
            ));
        }
        (kept, 0)
    };
    let mut result = validate(&usable, &embeddings, opts.strict).at(Stage::Validation)?;
    result.embedding_id = Some(format!("sha256:{}", short_hash(&opts.embeddings)?));
    let artifact = ValidationArtifact {
        hyphen_policy: opts.hyphen_policy,
        dropped_by_hyphen_policy: dropped_hyphen,
        dropped_missing_embeddings: dropped_missing,
        result,
    };
    write_csv(&opts.out.join(VALIDATION_CSV), |b| {
        artifact.result.write_csv(b)
    })?;
    write_json(&opts.out.join(VALIDATION_FILE), &artifact)?;
    Ok(artifact)
}
