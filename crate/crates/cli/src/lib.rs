//! Command-line pipeline: `fit`, `topics`, `eval`, `run` and `validate`.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use embtopic::io::HyphenPolicy;

pub use commands::{cmd_eval, cmd_fit, cmd_run, cmd_topics, cmd_validate, ValidateOptions};
pub use config::{PipelineArgs, PipelineConfig};
pub use error::{Stage, StageError};

#[derive(Debug, Parser)]
#[command(
    name = "embtopic",
    version,
    about = "Embedding-space topic extraction and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce document embeddings and fit the Gaussian mixture
    Fit(PipelineArgs),
    /// Extract topic words from the fitted clusters
    Topics(PipelineArgs),
    /// Compute evaluation metrics for the extracted topics
    Eval(PipelineArgs),
    /// fit, topics and eval in one go
    Run(PipelineArgs),
    /// Score the intruder metrics against annotated intrusion tasks
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HyphenArg {
    DropWord,
    DropInstance,
    Keep,
}

impl From<HyphenArg> for HyphenPolicy {
    fn from(h: HyphenArg) -> Self {
        match h {
            HyphenArg::DropWord => HyphenPolicy::DropWord,
            HyphenArg::DropInstance => HyphenPolicy::DropInstance,
            HyphenArg::Keep => HyphenPolicy::Keep,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct ValidateArgs {
    /// JSON Lines annotation file
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Count ties (metric or human) as misses
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum, default_value = "drop-word")]
    pub hyphen_policy: HyphenArg,
    #[arg(long)]
    pub skip_missing: bool,
}

/// Runs a parsed command and returns a short human-readable summary.
pub fn run(cli: Cli) -> Result<String, StageError> {
    match cli.command {
        Command::Fit(a) => {
            let s = cmd_fit(&a.resolve()?)?;
            Ok(format!(
                "fit: K={}{}",
                s.k,
                if s.cache_hit { " (cache hit)" } else { "" }
            ))
        }
        Command::Topics(a) => {
            let s = cmd_topics(&a.resolve()?)?;
            Ok(format!(
                "topics: {} topics from {} candidates, {} exhausted by cleaning",
                s.k, s.candidates, s.exhausted
            ))
        }
        Command::Eval(a) => {
            let r = cmd_eval(&a.resolve()?)?;
            Ok(headline(&r))
        }
        Command::Run(a) => {
            let (f, t, r) = cmd_run(&a.resolve()?)?;
            Ok(format!(
                "fit: K={}{}\ntopics: {} candidates\n{}",
                f.k,
                if f.cache_hit { " (cache hit)" } else { "" },
                t.candidates,
                headline(&r)
            ))
        }
        Command::Validate(a) => {
            let v = cmd_validate(&ValidateOptions {
                instances: a.instances,
                embeddings: a.embeddings,
                out: a.out,
                strict: a.strict,
                hyphen_policy: a.hyphen_policy.into(),
                skip_missing: a.skip_missing,
            })?;
            let mut buf = Vec::new();
            v.result
                .write_csv(&mut buf)
                .map_err(|e| StageError::internal(Stage::Output, e))?;
            Ok(format!(
                "validation over {} instances\n{}",
                v.result.instances,
                String::from_utf8_lossy(&buf).trim_end()
            ))
        }
    }
}

fn headline(r: &embtopic::metrics::MetricReport) -> String {
    embtopic::metrics::HEADLINE_COLUMNS
        .iter()
        .filter_map(|c| r.get(c).map(|v| format!("{c}={v:.4}")))
        .collect::<Vec<_>>()
        .join(" ")
}
