use std::fmt;

use thiserror::Error;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    EmbedIo,
    Reduction,
    Clustering,
    TopicExtraction,
    Metrics,
    Validation,
    Cache,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::EmbedIo => "embed-io",
            Stage::Reduction => "reduction",
            Stage::Clustering => "clustering",
            Stage::TopicExtraction => "topic-extraction",
            Stage::Metrics => "metrics",
            Stage::Validation => "validation",
            Stage::Cache => "cache",
            Stage::Output => "output",
        })
    }
}

/// An error tagged with its stage and process exit code.
#[derive(Debug, Error)]
#[error("[{stage}] {source:#}")]
pub struct StageError {
    pub stage: Stage,
    /// 1 for computation failures, 2 for bad usage or inputs.
    pub exit_code: u8,
    #[source]
    pub source: anyhow::Error,
}

impl StageError {
    pub fn usage(stage: Stage, msg: impl Into<String>) -> Self {
        StageError {
            stage,
            exit_code: 2,
            source: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn internal(stage: Stage, e: impl Into<anyhow::Error>) -> Self {
        StageError {
            stage,
            exit_code: 1,
            source: e.into(),
        }
    }
}

/// Attaches a stage to library errors, choosing the exit code from the
/// error kind.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T, embtopic::Error> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            exit_code: if e.is_input_error() { 2 } else { 1 },
            source: e.into(),
        })
    }
}
