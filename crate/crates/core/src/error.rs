use thiserror::Error;

/// Errors raised by the engine. Variants are grouped by the stage that
/// produces them; [`Error::is_input_error`] separates bad inputs from
/// numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    // --- embedding files ---
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error("truncated file at byte {offset}: expected {expected} records, read {read}")]
    Truncated {
        offset: u64,
        expected: u64,
        read: u64,
    },
    #[error("{count} trailing bytes after last record at byte {offset}")]
    TrailingData { offset: u64, count: u64 },
    #[error("record {record}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        record: usize,
        expected: usize,
        found: usize,
    },
    #[error("record {record}: non-finite value at component {component}")]
    NonFinite { record: usize, component: usize },
    #[error("record {record}: duplicate label {label:?}")]
    DuplicateLabel { record: usize, label: String },
    #[error("record {record}: invalid label: {reason}")]
    InvalidLabel { record: usize, reason: String },
    #[error("invalid JSON embedding set: {0}")]
    Json(String),

    // --- corpus / word lists / annotations ---
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {reason}")]
    Corpus { line: usize, reason: String },
    #[error("word list: {0}")]
    WordList(String),
    #[error("line {line}: invalid intruder instance: {reason}")]
    Instance { line: usize, reason: String },

    // --- vector arithmetic ---
    #[error("undefined similarity for zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    Dimensions { left: usize, right: usize },
    #[error("cannot take the centroid of an empty list")]
    EmptyInput,
    #[error("weights must be non-negative and sum to 1, got sum {sum}")]
    WeightSum { sum: f64 },
    #[error("length mismatch: {0}")]
    Length(String),

    // --- reduction / clustering ---
    #[error("target dimension {target} exceeds limit {limit}")]
    TargetDimension { target: usize, limit: usize },
    #[error("zero variance: all documents identical")]
    ZeroVariance,
    #[error("need at least {needed} documents, got {got}")]
    TooFewDocuments { needed: usize, got: usize },
    #[error("number of components K={k} exceeds document count {m}")]
    TooManyComponents { k: usize, m: usize },
    #[error("covariance of component {component} is numerically singular")]
    SingularCovariance { component: usize },
    #[error("component {component} is empty (total responsibility {mass:e})")]
    EmptyComponent { component: usize, mass: f64 },
    #[error("fit failed for K={k}: {source}")]
    SelectK {
        k: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),

    // --- topic extraction ---
    #[error("{total} candidate words lack embeddings: {shown:?}")]
    MissingEmbeddings { total: usize, shown: Vec<String> },
    #[error("candidate word {0:?} has a zero-norm embedding")]
    ZeroCandidate(String),

    // --- metrics / validation ---
    #[error("metric {metric}: {source}")]
    Metric {
        metric: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("word {0:?} has no embedding")]
    MissingWord(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn in_metric(metric: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Metric {
            metric,
            source: Box::new(e),
        }
    }

    /// True when the error stems from malformed or missing inputs rather
    /// than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::MalformedHeader { .. }
            | Error::Truncated { .. }
            | Error::TrailingData { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::DuplicateLabel { .. }
            | Error::InvalidLabel { .. }
            | Error::Json(_)
            | Error::EmptyCorpus
            | Error::Corpus { .. }
            | Error::WordList(_)
            | Error::Instance { .. }
            | Error::MissingEmbeddings { .. }
            | Error::MissingWord(_)
            | Error::TargetDimension { .. }
            | Error::TooFewDocuments { .. }
            | Error::TooManyComponents { .. }
            | Error::Parameter(_) => true,
            Error::SelectK { source, .. } | Error::Metric { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
