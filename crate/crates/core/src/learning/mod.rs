//! Training: MLE pretraining, annotation of generated candidates, hinge-loss
//! calibration, and the iterative generate/annotate/calibrate loop.

mod calibrate;
mod iterate;
mod mle;
mod pool;

pub use calibrate::{calibrate, CalibrationEpoch, CalibrationOutcome};
pub use iterate::{
    iterate, resume, IterationArtifacts, IterationRecord, IterationState, MetricSummary,
};
pub use mle::{gold_samples, train_mle, EpochLog, GoldItem, MleOutcome};
pub use pool::{annotate, ExtractionPool, LabeledSample, PoolKey};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::decoder::extract_all;
use crate::dump::DumpRecord;
use crate::evaluation::{evaluate_dump, Credit, EvalError, EvalReport};
use crate::tagger::{Model, TaggerError};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training set has no usable gold extractions")]
    EmptyTrainingSet,
    #[error("extraction pool is empty")]
    EmptyPool,
    #[error("positive-only calibration requested but the pool has no positive samples")]
    NoPositives,
    #[error("candidate refers to unknown sentence {0}")]
    UnknownSentence(String),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Artifact(String),
}

/// Which dump each calibrated model reranks during iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RerankSource {
    /// The base model's extractions, every iteration.
    Base,
    /// The extractions of the model from the previous iteration.
    #[default]
    Previous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub batch_size: usize,
    pub mle_epochs: usize,
    pub calib_epochs: usize,
    pub beam_k: usize,
    pub patience: usize,
    pub max_iterations: usize,
    pub positive_only: bool,
    /// Weight of an added MLE term during calibration; 0 is pure hinge.
    pub mle_weight: f64,
    pub rerank_source: RerankSource,
    pub credit: Credit,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            batch_size: 80,
            mle_epochs: 30,
            calib_epochs: 5,
            beam_k: 5,
            patience: 2,
            max_iterations: 10,
            positive_only: false,
            mle_weight: 0.0,
            rerank_source: RerankSource::Previous,
            credit: Credit::Greedy,
            seed: 0,
        }
    }
}

/// Generates candidates for every sentence of `data` and packs them as dump
/// records, in sentence order.
pub fn generate(model: &Model, data: &Dataset, k: usize, config_hash: Option<&str>) -> Vec<DumpRecord> {
    extract_all(model, &data.sentences, k)
        .iter()
        .map(|c| DumpRecord::from_candidate(c, config_hash))
        .collect()
}

/// End-to-end generation quality on `data`.
pub fn generate_eval(
    model: &Model,
    data: &Dataset,
    k: usize,
    credit: Credit,
) -> Result<(Vec<DumpRecord>, EvalReport), LearnError> {
    let dump = generate(model, data, k, None);
    let report = evaluate_dump(&dump, data, credit)?;
    Ok((dump, report))
}
