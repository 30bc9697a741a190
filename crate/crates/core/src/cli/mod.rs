//! The `oiecal` command line.

mod artifacts;
mod commands;
pub mod config;
pub mod convert;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::dump::DumpError;
use crate::evaluation::EvalError;
use crate::learning::LearnError;
use crate::tagger::TaggerError;
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Data(_) => 5,
        }
    }
}

impl From<TaggerError> for CliError {
    fn from(e: TaggerError) -> Self {
        match e {
            TaggerError::NonFiniteGradient(_) | TaggerError::NonFiniteParameter(_) => {
                CliError::Numeric(e.to_string())
            }
            TaggerError::Config(_) => CliError::Config(e.to_string()),
            TaggerError::Checkpoint { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Tagger(t) => t.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match &e {
            CorpusError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingArtifact(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DumpError> for CliError {
    fn from(e: DumpError) -> Self {
        match &e {
            DumpError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingArtifact(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oiecal", version, about = "Open IE tagger with confidence calibration")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub run_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    pub train: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub dev: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub test: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Accept inputs whose config hash differs, and overwrite finished runs.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert OIE2016 benchmark files into corpus JSON lines.
    Convert {
        /// A benchmark file, or a directory of `*.conll` files.
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Write the raw conversion without cleaning.
        #[arg(long)]
        no_clean: bool,
    },
    /// Write a synthetic template-grammar corpus.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        train_sentences: usize,
        #[arg(long, default_value_t = 100)]
        dev_sentences: usize,
    },
    /// Train the base tagger on gold extractions.
    Train {
        /// Checkpoint to write (default: RUN_DIR/base.ckpt).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Decode candidate extractions for a split.
    Generate {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Dev)]
        split: Split,
        /// Dump to write (default: RUN_DIR/<split>_dump.jsonl).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Annotate a train dump and fine-tune with the hinge loss.
    Calibrate {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Train-split dump (default: RUN_DIR/train_dump.jsonl).
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
        /// Existing pool to extend before training.
        #[arg(long, value_name = "PATH")]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        round: usize,
        /// Checkpoint to write (default: RUN_DIR/calibrated.ckpt).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Rescore a fixed dump with a model and evaluate it.
    Rerank {
        /// Default: RUN_DIR/calibrated.ckpt.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Default: RUN_DIR/<split>_dump.jsonl.
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Dev)]
        split: Split,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Score a dump against gold.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        dump: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Dev)]
        split: Split,
    },
    /// Alternate generation, annotation and calibration.
    Iterate {
        /// Base model (default: RUN_DIR/base.ckpt).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Continue an interrupted run from its manifest.
        #[arg(long)]
        resume: bool,
    },
}

/// Resolves the run configuration: defaults, then the config file, then
/// `--set` overrides, then dedicated flags.
pub fn resolve_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(dir) = &common.run_dir {
        cfg.run_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.model.seed = seed;
        cfg.learn.seed = seed;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    for (slot, flag) in [
        (&mut cfg.train, &common.train),
        (&mut cfg.dev, &common.dev),
        (&mut cfg.test, &common.test),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line inside a worker pool of the requested size.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let ctx = commands::Context {
        cfg,
        force: cli.common.force,
    };
    pool.install(|| commands::dispatch(&ctx, cli.command))
}

/// Parses `args` (program name first) and runs them.
pub fn run_from<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    run(cli)
}
