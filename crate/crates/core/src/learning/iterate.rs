use log::info;
use serde::{Deserialize, Serialize};

use super::{
    annotate, calibrate, generate, generate_eval, ExtractionPool, LearnConfig, LearnError,
    RerankSource,
};
use crate::corpus::{Dataset, Polarity};
use crate::dump::DumpRecord;
use crate::evaluation::{rerank_eval, EvalReport};
use crate::tagger::Model;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub auc: f64,
    pub best_f1: f64,
}

impl From<&EvalReport> for MetricSummary {
    fn from(r: &EvalReport) -> Self {
        MetricSummary {
            auc: r.auc,
            best_f1: r.best_f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub pool_size: usize,
    pub added: usize,
    pub positives: usize,
    pub negatives: usize,
    pub generate: MetricSummary,
    pub rerank: MetricSummary,
    pub selected_epoch: usize,
    pub hinge_losses: Vec<f64>,
}

/// Everything produced by one iteration, handed to the observer before the
/// loop moves on.
pub struct IterationArtifacts<'a> {
    pub record: &'a IterationRecord,
    pub model: &'a Model,
    pub train_dump: &'a [DumpRecord],
    pub pool: &'a ExtractionPool,
    pub dev_dump: &'a [DumpRecord],
    pub dev_report: &'a EvalReport,
}

/// Resumable loop state. `iteration` counts completed iterations.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub iteration: usize,
    pub model: Model,
    pub best_model: Model,
    pub best_iteration: usize,
    pub best_auc: f64,
    pub since_best: usize,
    pub pool: ExtractionPool,
    pub history: Vec<IterationRecord>,
    pub base: MetricSummary,
    pub base_dev_dump: Vec<DumpRecord>,
    pub prev_dev_dump: Vec<DumpRecord>,
}

impl IterationState {
    /// Fresh state around the base model, evaluated on `dev`.
    pub fn start(base: Model, dev: &Dataset, cfg: &LearnConfig) -> Result<Self, LearnError> {
        let (dump, report) = generate_eval(&base, dev, cfg.beam_k, cfg.credit)?;
        info!("base model: dev auc {:.4} f1 {:.4}", report.auc, report.best_f1);
        Ok(IterationState {
            iteration: 0,
            best_model: base.clone(),
            model: base,
            best_iteration: 0,
            best_auc: report.auc,
            since_best: 0,
            pool: ExtractionPool::new(),
            history: Vec::new(),
            base: MetricSummary::from(&report),
            base_dev_dump: dump.clone(),
            prev_dev_dump: dump,
        })
    }

    /// Whether the loop would run another iteration.
    pub fn should_continue(&self, cfg: &LearnConfig) -> bool {
        self.iteration < cfg.max_iterations && (cfg.patience == 0 || self.since_best < cfg.patience)
    }
}

/// Runs the generate/annotate/calibrate loop from the base model.
pub fn iterate<F>(
    train: &Dataset,
    dev: &Dataset,
    base: Model,
    cfg: &LearnConfig,
    observer: F,
) -> Result<IterationState, LearnError>
where
    F: FnMut(&IterationArtifacts<'_>) -> Result<(), LearnError>,
{
    let state = IterationState::start(base, dev, cfg)?;
    resume(state, train, dev, cfg, observer)
}

/// Continues a loop from `state`. Stops at `max_iterations`, or after
/// `patience` consecutive iterations without a dev AUC above the best so far
/// (0 disables early stopping).
pub fn resume<F>(
    mut state: IterationState,
    train: &Dataset,
    dev: &Dataset,
    cfg: &LearnConfig,
    mut observer: F,
) -> Result<IterationState, LearnError>
where
    F: FnMut(&IterationArtifacts<'_>) -> Result<(), LearnError>,
{
    while state.should_continue(cfg) {
        let t = state.iteration + 1;
        let train_dump = generate(&state.model, train, cfg.beam_k, None);
        let labeled = annotate(&train_dump, train, t)?;
        let added = state.pool.extend(labeled);
        let positives = state.pool.positives();
        info!(
            "iteration {t}: {} candidates, {added} new, pool {} ({positives} positive)",
            train_dump.len(),
            state.pool.len()
        );

        let outcome = calibrate(&state.model, &state.pool, train, Some(dev), cfg, t)?;
        let model = outcome.model;
        let (dev_dump, dev_report) = generate_eval(&model, dev, cfg.beam_k, cfg.credit)?;
        let rerank_base = match cfg.rerank_source {
            RerankSource::Base => &state.base_dev_dump,
            RerankSource::Previous => &state.prev_dev_dump,
        };
        let rerank = rerank_eval(rerank_base, &model, dev, cfg.credit)?;
        let record = IterationRecord {
            iteration: t,
            pool_size: state.pool.len(),
            added,
            positives,
            negatives: state
                .pool
                .iter()
                .filter(|s| s.polarity == Polarity::Negative)
                .count(),
            generate: MetricSummary::from(&dev_report),
            rerank: MetricSummary::from(&rerank),
            selected_epoch: outcome.selected_epoch,
            hinge_losses: outcome.epochs.iter().map(|e| e.hinge_loss).collect(),
        };
        info!(
            "iteration {t}: dev generate auc {:.4} f1 {:.4}, rerank auc {:.4}",
            record.generate.auc, record.generate.best_f1, record.rerank.auc
        );
        observer(&IterationArtifacts {
            record: &record,
            model: &model,
            train_dump: &train_dump,
            pool: &state.pool,
            dev_dump: &dev_dump,
            dev_report: &dev_report,
        })?;

        if dev_report.auc > state.best_auc {
            state.best_auc = dev_report.auc;
            state.best_model = model.clone();
            state.best_iteration = t;
            state.since_best = 0;
        } else {
            state.since_best += 1;
        }
        state.model = model;
        state.prev_dev_dump = dev_dump;
        state.history.push(record);
        state.iteration = t;
    }
    Ok(state)
}
