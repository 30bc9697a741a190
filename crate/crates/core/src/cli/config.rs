//! Run configuration: a flat `key = value` file, overridden by flags.
//!
//! ```text
//! # model
//! hidden_dim = 64
//! num_layers = 4
//! # data
//! train = data/train.jsonl
//! dev = data/dev.jsonl
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::evaluation::Credit;
use crate::learning::{LearnConfig, RerankSource};
use crate::tagger::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub learn: LearnConfig,
    pub min_count: usize,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub run_dir: PathBuf,
    pub clean_train: bool,
    pub clean_dev: bool,
    pub clean_test: bool,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            learn: LearnConfig::default(),
            min_count: 1,
            train: None,
            dev: None,
            test: None,
            run_dir: PathBuf::from("run"),
            clean_train: true,
            clean_dev: true,
            clean_test: true,
            workers: None,
        }
    }
}

/// Every key accepted in a config file or by `--set`.
pub const KEYS: &[&str] = &[
    "word_dim",
    "predicate_dim",
    "hidden_dim",
    "num_layers",
    "recurrent_dropout",
    "max_args",
    "seed",
    "beam_k",
    "batch_size",
    "mle_epochs",
    "calib_epochs",
    "patience",
    "max_iterations",
    "positive_only",
    "mle_weight",
    "rerank_source",
    "credit",
    "min_count",
    "train",
    "dev",
    "test",
    "run_dir",
    "clean_train",
    "clean_dev",
    "clean_test",
    "workers",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key} = {value:?}: {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "word_dim" => self.model.word_dim = parse(key, value)?,
            "predicate_dim" => self.model.predicate_dim = parse(key, value)?,
            "hidden_dim" => self.model.hidden_dim = parse(key, value)?,
            "num_layers" => self.model.num_layers = parse(key, value)?,
            "recurrent_dropout" => self.model.recurrent_dropout = parse(key, value)?,
            "max_args" => self.model.max_args = parse(key, value)?,
            "seed" => {
                let seed = parse(key, value)?;
                self.model.seed = seed;
                self.learn.seed = seed;
            }
            "beam_k" => self.learn.beam_k = parse(key, value)?,
            "batch_size" => self.learn.batch_size = parse(key, value)?,
            "mle_epochs" => self.learn.mle_epochs = parse(key, value)?,
            "calib_epochs" => self.learn.calib_epochs = parse(key, value)?,
            "patience" => self.learn.patience = parse(key, value)?,
            "max_iterations" => self.learn.max_iterations = parse(key, value)?,
            "positive_only" => self.learn.positive_only = parse(key, value)?,
            "mle_weight" => self.learn.mle_weight = parse(key, value)?,
            "rerank_source" => {
                self.learn.rerank_source = match value {
                    "base" => RerankSource::Base,
                    "previous" => RerankSource::Previous,
                    _ => return Err(CliError::Config(format!("rerank_source must be base or previous, got {value:?}"))),
                }
            }
            "credit" => {
                self.learn.credit = match value {
                    "greedy" => Credit::Greedy,
                    "any" => Credit::Any,
                    _ => return Err(CliError::Config(format!("credit must be greedy or any, got {value:?}"))),
                }
            }
            "min_count" => self.min_count = parse(key, value)?,
            "train" => self.train = Some(PathBuf::from(value)),
            "dev" => self.dev = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "run_dir" => self.run_dir = PathBuf::from(value),
            "clean_train" => self.clean_train = parse(key, value)?,
            "clean_dev" => self.clean_dev = parse(key, value)?,
            "clean_test" => self.clean_test = parse(key, value)?,
            "workers" => self.workers = Some(parse(key, value)?),
            _ => return Err(CliError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment; blank lines are
    /// ignored. Relative paths are kept as written.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected key = value", i + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingArtifact(format!("config file {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let l = &self.learn;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Config(msg.to_string())) };
        check(l.beam_k >= 1, "beam_k must be at least 1")?;
        check(l.batch_size >= 1, "batch_size must be at least 1")?;
        check(l.calib_epochs >= 1, "calib_epochs must be at least 1")?;
        check(l.mle_weight >= 0.0 && l.mle_weight.is_finite(), "mle_weight must be finite and non-negative")?;
        check(self.min_count >= 1, "min_count must be at least 1")?;
        check(self.workers != Some(0), "workers must be at least 1")?;
        Ok(())
    }

    /// Hex SHA-256 over the settings that determine model identity: the
    /// model config (seed included) and the vocabulary cutoff. Paths, worker
    /// counts and learning schedules are excluded, so a checkpoint stays usable
    /// when those change.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Identity<'a> {
            model: &'a ModelConfig,
            min_count: usize,
        }
        let bytes = serde_json::to_vec(&Identity {
            model: &self.model,
            min_count: self.min_count,
        })
        .unwrap_or_default();
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_text("hidden_dim = 12 # small\n\nseed=3\ncredit = any\n", "t").unwrap();
        assert_eq!((c.model.hidden_dim, c.model.seed, c.learn.seed), (12, 3, 3));
        assert_eq!(c.learn.credit, Credit::Any);
        c.set("hidden_dim", "20").unwrap();
        assert_eq!(c.model.hidden_dim, 20);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("nonsense", "t"), Err(CliError::Config(_))));
        assert!(matches!(c.set("bogus", "1"), Err(CliError::Config(_))));
        assert!(matches!(c.set("hidden_dim", "x"), Err(CliError::Config(_))));
        c.model.recurrent_dropout = 1.5;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_paths_and_workers() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.run_dir = "elsewhere".into();
        b.workers = Some(3);
        b.learn.calib_epochs = 9;
        assert_eq!(a.hash(), b.hash());
        b.model.hidden_dim += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn every_key_is_settable() {
        let sample = |k: &str| match k {
            "recurrent_dropout" | "mle_weight" => "0.1",
            "positive_only" | "clean_train" | "clean_dev" | "clean_test" => "true",
            "rerank_source" => "base",
            "credit" => "greedy",
            "train" | "dev" | "test" | "run_dir" => "x",
            _ => "2",
        };
        for k in KEYS {
            RunConfig::default().set(k, sample(k)).unwrap();
        }
    }
}
