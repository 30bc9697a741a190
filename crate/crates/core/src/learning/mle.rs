use log::{info, warn};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::{LearnConfig, LearnError};
use crate::bio::{encode, LabelSequence};
use crate::corpus::{Dataset, Sentence};
use crate::seed::{self, Stream};
use crate::tagger::{mle_loss, mle_nll, Adadelta, DropoutMasks, MleSample, Model};

/// A gold training item: the sentence, the predicate position (the gold
/// predicate's head), and the encoded gold labels.
#[derive(Clone, Debug)]
pub struct GoldItem<'a> {
    pub sentence: &'a Sentence,
    pub predicate: usize,
    pub labels: LabelSequence,
}

/// One item per (sentence, gold extraction) pair. Extractions with more
/// arguments than the alphabet allows are skipped.
pub fn gold_samples(d: &Dataset, max_args: usize) -> Vec<GoldItem<'_>> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for s in &d.sentences {
        for x in d.gold_for(&s.id) {
            match encode(s.len(), x, max_args) {
                Ok(labels) => out.push(GoldItem {
                    sentence: s,
                    predicate: x.predicate.head,
                    labels,
                }),
                Err(_) => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} gold extraction(s) that cannot be encoded with {max_args} argument slots");
    }
    out
}

fn as_samples<'a>(items: &'a [GoldItem<'a>]) -> Vec<MleSample<'a>> {
    items
        .iter()
        .map(|g| MleSample {
            sentence: g.sentence,
            predicate: g.predicate,
            gold: &g.labels,
            masks: None,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Token-weighted training loss under dropout, accumulated over the epoch.
    pub train_loss: f64,
    /// Eval-mode loss on the selection set (dev, or train without dev).
    pub select_loss: f64,
}

#[derive(Clone, Debug)]
pub struct MleOutcome {
    pub model: Model,
    pub history: Vec<EpochLog>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

/// Maximum-likelihood training on gold extractions. Returns the epoch with the
/// lowest dev loss (training loss when `dev` is `None`).
pub fn train_mle(
    init: Model,
    train: &Dataset,
    dev: Option<&Dataset>,
    cfg: &LearnConfig,
) -> Result<MleOutcome, LearnError> {
    let max_args = init.config.max_args;
    let train_items = gold_samples(train, max_args);
    if train_items.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    let dev_items = dev.map(|d| gold_samples(d, max_args)).unwrap_or_default();
    let select_items = if dev_items.is_empty() {
        &train_items
    } else {
        &dev_items
    };
    let select_samples = as_samples(select_items);

    let mut model = init;
    let mut opt = Adadelta::new(&model.params);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut history = Vec::with_capacity(cfg.mle_epochs);
    let mut order: Vec<usize> = (0..train_items.len()).collect();
    let batch_size = cfg.batch_size.max(1);
    for epoch in 1..=cfg.mle_epochs {
        order.shuffle(&mut seed::rng(cfg.seed, Stream::Shuffle, epoch as u64));
        let mut dropout = seed::rng(cfg.seed, Stream::Dropout, epoch as u64);
        let (mut loss_sum, mut tokens) = (0.0, 0usize);
        for batch in order.chunks(batch_size) {
            let samples: Vec<MleSample<'_>> = batch
                .iter()
                .map(|&i| {
                    let g = &train_items[i];
                    MleSample {
                        sentence: g.sentence,
                        predicate: g.predicate,
                        gold: &g.labels,
                        masks: DropoutMasks::sample(&model.config, &mut dropout),
                    }
                })
                .collect();
            let out = mle_loss(&model, &samples);
            let n: usize = samples.iter().map(|s| s.sentence.len()).sum();
            loss_sum += out.loss * n as f64;
            tokens += n;
            opt.step(&mut model.params, &out.grads)?;
        }
        let select_loss = mle_nll(&model, &select_samples);
        let train_loss = loss_sum / tokens.max(1) as f64;
        info!("mle epoch {epoch}: train {train_loss:.5} select {select_loss:.5}");
        history.push(EpochLog {
            epoch,
            train_loss,
            select_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| select_loss < *b) {
            best = Some((select_loss, epoch, model.clone()));
        }
    }
    let (best_epoch, model) = match best {
        Some((_, e, m)) => (e, m),
        None => (0, model),
    };
    Ok(MleOutcome {
        model,
        history,
        best_epoch,
    })
}
