use rayon::prelude::*;

use super::matrix::Matrix;
use super::{DropoutMasks, Model, Params};
use crate::bio::LabelSequence;
use crate::corpus::{Polarity, Sentence};

/// Work units per parallel chunk. Gradients are summed inside a chunk in input
/// order, then chunks are summed in chunk order, so the result does not depend
/// on the number of worker threads.
const CHUNK: usize = 16;

#[derive(Clone, Debug)]
pub struct MleSample<'a> {
    pub sentence: &'a Sentence,
    pub predicate: usize,
    pub gold: &'a LabelSequence,
    pub masks: Option<DropoutMasks>,
}

#[derive(Clone, Debug)]
pub struct HingeSample<'a> {
    pub sentence: &'a Sentence,
    pub predicate: usize,
    pub labels: &'a LabelSequence,
    pub polarity: Polarity,
    pub masks: Option<DropoutMasks>,
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: Params,
    /// Hinge samples with a positive margin violation (all samples for MLE).
    pub active: usize,
}

fn reduce_chunks<T: Sync>(
    model: &Model,
    units: &[T],
    f: impl Fn(&T, &mut Params) -> (f64, usize) + Sync,
) -> (f64, Params, usize) {
    let partials: Vec<(f64, Params, usize)> = units
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = model.zero_grads();
            let mut loss = 0.0;
            let mut active = 0;
            for u in chunk {
                let (l, a) = f(u, &mut grads);
                loss += l;
                active += a;
            }
            (loss, grads, active)
        })
        .collect();
    let mut total = model.zero_grads();
    let mut loss = 0.0;
    let mut active = 0;
    for (l, g, a) in &partials {
        loss += l;
        total.add_assign(g);
        active += a;
    }
    (loss, total, active)
}

/// Token-averaged negative log-likelihood of the gold label sequences.
pub fn mle_loss(model: &Model, batch: &[MleSample<'_>]) -> LossOutput {
    let tokens: usize = batch.iter().map(|s| s.sentence.len()).sum();
    let (loss, mut grads, _) = reduce_chunks(model, batch, |s, grads| {
        assert_eq!(s.gold.len(), s.sentence.len(), "gold length mismatch for {}", s.sentence.id);
        let ids = model.vocab.ids(&s.sentence.tokens);
        let cache = model.forward_cached(&ids, s.predicate, s.masks.as_ref());
        let lp = cache.dists.log_probs();
        let mut d = Matrix::zeros(lp.rows(), lp.cols());
        let mut nll = 0.0;
        for (t, label) in s.gold.0.iter().enumerate() {
            let y = label.id();
            nll -= lp.get(t, y);
            let row = d.row_mut(t);
            for (dv, l) in row.iter_mut().zip(lp.row(t)) {
                *dv = l.exp();
            }
            row[y] -= 1.0;
        }
        model.backward(&cache, &d, grads);
        (nll, 1)
    });
    if tokens == 0 {
        return LossOutput {
            loss: 0.0,
            grads,
            active: 0,
        };
    }
    let norm = 1.0 / tokens as f64;
    grads.scale(norm);
    LossOutput {
        loss: loss * norm,
        grads,
        active: batch.len(),
    }
}

/// Mean of `max(0, 1 - t * c)` over the samples, where `c` is the
/// length-normalized log-probability of the sample's labels. Samples sharing
/// a `(sentence, predicate)` pair share one forward pass.
pub fn hinge_loss(model: &Model, samples: &[HingeSample<'_>]) -> LossOutput {
    let mut groups: Vec<Vec<&HingeSample<'_>>> = Vec::new();
    let mut index: std::collections::HashMap<(&str, usize), usize> = Default::default();
    for s in samples {
        let key = (s.sentence.id.as_str(), s.predicate);
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(s);
    }
    let (loss, mut grads, active) = reduce_chunks(model, &groups, |group, grads| {
        let first = group[0];
        let n = first.sentence.len();
        let ids = model.vocab.ids(&first.sentence.tokens);
        let cache = model.forward_cached(&ids, first.predicate, first.masks.as_ref());
        let lp = cache.dists.log_probs();
        let mut d = Matrix::zeros(lp.rows(), lp.cols());
        let mut loss = 0.0;
        let mut active = 0;
        for s in group {
            assert_eq!(s.labels.len(), n, "label length mismatch for {}", s.sentence.id);
            let sum: f64 = s.labels.0.iter().enumerate().map(|(t, l)| lp.get(t, l.id())).sum();
            let c = sum / n as f64;
            let sign = s.polarity.sign();
            let margin = 1.0 - sign * c;
            if margin > 0.0 {
                loss += margin;
                active += 1;
                // d(margin)/d(logits_t) = (sign / n) * (p_t - onehot(y_t))
                let scale = sign / n as f64;
                for (t, l) in s.labels.0.iter().enumerate() {
                    let row = d.row_mut(t);
                    for (dv, lv) in row.iter_mut().zip(lp.row(t)) {
                        *dv += scale * lv.exp();
                    }
                    row[l.id()] -= scale;
                }
            }
        }
        if active > 0 {
            model.backward(&cache, &d, grads);
        }
        (loss, active)
    });
    if samples.is_empty() {
        return LossOutput {
            loss: 0.0,
            grads,
            active: 0,
        };
    }
    let norm = 1.0 / samples.len() as f64;
    grads.scale(norm);
    LossOutput {
        loss: loss * norm,
        grads,
        active,
    }
}

/// Token-averaged negative log-likelihood without gradients (eval mode).
pub fn mle_nll(model: &Model, batch: &[MleSample<'_>]) -> f64 {
    let tokens: usize = batch.iter().map(|s| s.sentence.len()).sum();
    if tokens == 0 {
        return 0.0;
    }
    let per_item: Vec<f64> = batch
        .par_iter()
        .map(|s| {
            let d = model.forward(s.sentence, s.predicate, s.masks.as_ref());
            -s.gold.0.iter().enumerate().map(|(t, l)| d.log_prob(t, l.id())).sum::<f64>()
        })
        .collect();
    per_item.iter().sum::<f64>() / tokens as f64
}
