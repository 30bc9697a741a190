use std::collections::HashMap;

use log::info;
use rand::seq::SliceRandom;
use serde::Serialize;

use super::mle::gold_samples;
use super::{generate_eval, ExtractionPool, LabeledSample, LearnConfig, LearnError};
use crate::corpus::{Dataset, Polarity, Sentence};
use crate::seed::{self, Stream};
use crate::tagger::{hinge_loss, mle_loss, Adadelta, DropoutMasks, HingeSample, MleSample, Model};

/// Stream index for calibration round `round`, epoch `epoch`. Round 0 is MLE.
fn stream_index(round: usize, epoch: usize) -> u64 {
    ((round as u64) << 32) | epoch as u64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationEpoch {
    pub epoch: usize,
    pub hinge_loss: f64,
    pub active_fraction: f64,
    pub dev_auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CalibrationOutcome {
    pub model: Model,
    pub epochs: Vec<CalibrationEpoch>,
    /// 1-based epoch whose parameters were returned.
    pub selected_epoch: usize,
}

/// Fine-tunes a copy of `model` on the pool's hinge loss with fresh Adadelta
/// accumulators. Samples sharing `(sentence, predicate)` travel together, and
/// batches are filled to at least `batch_size` samples. With a dev set the
/// epoch with the best generation AUC is returned (earliest on ties);
/// otherwise the last epoch.
pub fn calibrate(
    model: &Model,
    pool: &ExtractionPool,
    train: &Dataset,
    dev: Option<&Dataset>,
    cfg: &LearnConfig,
    round: usize,
) -> Result<CalibrationOutcome, LearnError> {
    if pool.is_empty() {
        return Err(LearnError::EmptyPool);
    }
    let samples: Vec<&LabeledSample> = pool
        .iter()
        .filter(|s| !cfg.positive_only || s.polarity == Polarity::Positive)
        .collect();
    if samples.is_empty() {
        return Err(LearnError::NoPositives);
    }
    let sentences = train.sentence_index();
    // Pool iteration is key-ordered, so samples of one (sentence, predicate)
    // pair are contiguous.
    let mut groups: Vec<(&Sentence, usize, Vec<&LabeledSample>)> = Vec::new();
    for s in samples {
        let sentence = *sentences
            .get(s.sentence_id.as_str())
            .ok_or_else(|| LearnError::UnknownSentence(s.sentence_id.clone()))?;
        match groups.last_mut() {
            Some((sent, v, members)) if sent.id == s.sentence_id && *v == s.predicate => members.push(s),
            _ => groups.push((sentence, s.predicate, vec![s])),
        }
    }
    let gold_by_sentence: HashMap<&str, Vec<_>> = if cfg.mle_weight > 0.0 {
        let mut m: HashMap<&str, Vec<_>> = HashMap::new();
        for g in gold_samples(train, model.config.max_args) {
            m.entry(g.sentence.id.as_str()).or_default().push(g);
        }
        m
    } else {
        HashMap::new()
    };

    let mut current = model.clone();
    let mut opt = Adadelta::new(&current.params);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let batch_size = cfg.batch_size.max(1);
    let mut epochs = Vec::with_capacity(cfg.calib_epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 1..=cfg.calib_epochs {
        let idx = stream_index(round, epoch);
        order.shuffle(&mut seed::rng(cfg.seed, Stream::Shuffle, idx));
        let mut dropout = seed::rng(cfg.seed, Stream::Dropout, idx);
        let (mut loss_sum, mut seen, mut active) = (0.0, 0usize, 0usize);
        let mut start = 0;
        while start < order.len() {
            let mut end = start;
            let mut count = 0;
            while end < order.len() && count < batch_size {
                count += groups[order[end]].2.len();
                end += 1;
            }
            let mut batch: Vec<HingeSample<'_>> = Vec::with_capacity(count);
            for &g in &order[start..end] {
                let (sentence, v, members) = &groups[g];
                let masks = DropoutMasks::sample(&current.config, &mut dropout);
                for s in members {
                    batch.push(HingeSample {
                        sentence,
                        predicate: *v,
                        labels: &s.labels,
                        polarity: s.polarity,
                        masks: masks.clone(),
                    });
                }
            }
            let mut out = hinge_loss(&current, &batch);
            loss_sum += out.loss * batch.len() as f64;
            seen += batch.len();
            active += out.active;
            if cfg.mle_weight > 0.0 {
                let mut ids: Vec<&str> = order[start..end].iter().map(|&g| groups[g].0.id.as_str()).collect();
                ids.dedup();
                let gold: Vec<MleSample<'_>> = ids
                    .iter()
                    .flat_map(|id| gold_by_sentence.get(id).into_iter().flatten())
                    .map(|g| MleSample {
                        sentence: g.sentence,
                        predicate: g.predicate,
                        gold: &g.labels,
                        masks: DropoutMasks::sample(&current.config, &mut dropout),
                    })
                    .collect();
                if !gold.is_empty() {
                    let mut extra = mle_loss(&current, &gold);
                    extra.grads.scale(cfg.mle_weight);
                    out.grads.add_assign(&extra.grads);
                }
            }
            opt.step(&mut current.params, &out.grads)?;
            start = end;
        }
        let hinge = loss_sum / seen.max(1) as f64;
        let dev_auc = match dev {
            Some(d) => Some(generate_eval(&current, d, cfg.beam_k, cfg.credit)?.1.auc),
            None => None,
        };
        info!(
            "calibration round {round} epoch {epoch}: hinge {hinge:.5} active {active}/{seen} dev auc {}",
            dev_auc.map_or("-".to_string(), |a| format!("{a:.4}"))
        );
        epochs.push(CalibrationEpoch {
            epoch,
            hinge_loss: hinge,
            active_fraction: active as f64 / seen.max(1) as f64,
            dev_auc,
        });
        let score = dev_auc.unwrap_or(epoch as f64);
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, current.clone()));
        }
    }
    let (selected_epoch, model) = match best {
        Some((_, e, m)) => (e, m),
        None => (0, current),
    };
    Ok(CalibrationOutcome {
        model,
        epochs,
        selected_epoch,
    })
}
