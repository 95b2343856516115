//! Command-line front end: `run`, `eval` and `list-backends`.
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 configuration error,
//! 3 I/O error.

mod eval;
mod run;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::components::Registry;
use crate::error::{Error, Result};
use crate::model::{PipelineConfig, Vocabulary};

pub use eval::{cmd_eval, EvalReport, REPORT_JSON, REPORT_TEXT};
pub use run::{cmd_run, InstanceRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidVocabulary(_)
        | Error::UnknownBackend { .. }
        | Error::BackendUnavailable { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Image(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ovcd", version, about = "Open-vocabulary change detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect changes for every pair and vocabulary class.
    Run(RunArgs),
    /// Score predicted class maps against reference labels.
    Eval(EvalArgs),
    /// Print the registered component backends.
    ListBackends,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// First-temporal image or directory; a dataset root when --t2 is omitted.
    #[arg(long)]
    pub t1: PathBuf,
    /// Second-temporal image or directory.
    #[arg(long)]
    pub t2: Option<PathBuf>,
    /// Output directory for class maps and instance files.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted class map, or a directory of them.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference class map, or a directory with matching file names.
    #[arg(long)]
    pub gt: PathBuf,
    /// Class names in index order (index 1 first), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub classes: Vec<String>,
    /// Directory for the report files (default: the prediction directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub vocabulary: Vocabulary,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.pipeline.validate()?;
        cfg.vocabulary.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_toml(&text)
    }
}

pub fn cmd_list_backends(registry: &Registry, out: &mut impl Write) -> i32 {
    for (kind, id) in registry.list() {
        if writeln!(out, "{kind}\t{id}").is_err() {
            return EXIT_IO;
        }
    }
    EXIT_OK
}

pub fn dispatch(cli: Cli, registry: &Registry) -> i32 {
    match cli.command {
        Command::Run(args) => cmd_run(&args, registry),
        Command::Eval(args) => cmd_eval(&args),
        Command::ListBackends => cmd_list_backends(registry, &mut std::io::stdout().lock()),
    }
}

fn thread_pool(workers: Option<u16>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.map_or(0, usize::from))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}
