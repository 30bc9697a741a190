//! The sequence tagger: word and predicate-indicator embeddings, stacked
//! alternating-direction highway LSTMs with recurrent dropout, and an
//! independent softmax over labels at every position.

mod checkpoint;
mod loss;
pub mod matrix;
mod network;
mod optim;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{hinge_loss, mle_loss, mle_nll, HingeSample, LossOutput, MleSample};
pub use optim::{adadelta_update, Adadelta, ADADELTA_EPS, ADADELTA_RHO};
pub use params::{LayerParams, Params};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bio::LabelSet;
use crate::corpus::{Sentence, Vocab};
use crate::seed::{self, Stream};
use matrix::{log_softmax_in_place, mat_vec_acc, vec_mat_acc, Matrix};
use network::{layer_backward, layer_forward, LayerCache};

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("non-finite parameter in {0} after update")]
    NonFiniteParameter(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("invalid model config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub predicate_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub recurrent_dropout: f64,
    pub max_args: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            predicate_dim: 100,
            hidden_dim: 64,
            num_layers: 4,
            recurrent_dropout: 0.1,
            max_args: 4,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), TaggerError> {
        if self.num_layers == 0 {
            return Err(TaggerError::Config("num_layers must be at least 1".into()));
        }
        if self.word_dim == 0 || self.predicate_dim == 0 || self.hidden_dim == 0 {
            return Err(TaggerError::Config("dimensions must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.recurrent_dropout) {
            return Err(TaggerError::Config("recurrent_dropout must be in [0, 1)".into()));
        }
        if self.max_args > 100 {
            return Err(TaggerError::Config("max_args must be at most 100".into()));
        }
        Ok(())
    }

    pub fn labels(&self) -> LabelSet {
        LabelSet::new(self.max_args)
    }

    fn input_dim(&self) -> usize {
        self.word_dim + self.predicate_dim
    }
}

/// Per-position label distributions, stored as log-probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistributions {
    log_probs: Matrix,
}

impl LabelDistributions {
    pub fn from_log_probs(log_probs: Matrix) -> Self {
        LabelDistributions { log_probs }
    }

    /// Builds distributions from raw probabilities; zeros become `-inf`.
    pub fn from_probs(probs: &Matrix) -> Self {
        let data = probs.as_slice().iter().map(|p| p.ln()).collect();
        LabelDistributions {
            log_probs: Matrix::from_vec(probs.rows(), probs.cols(), data),
        }
    }

    pub fn len(&self) -> usize {
        self.log_probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.rows() == 0
    }

    pub fn num_labels(&self) -> usize {
        self.log_probs.cols()
    }

    pub fn log_probs(&self) -> &Matrix {
        &self.log_probs
    }

    pub fn log_prob(&self, t: usize, label: usize) -> f64 {
        self.log_probs.get(t, label)
    }

    pub fn probs(&self) -> Matrix {
        let data = self.log_probs.as_slice().iter().map(|l| l.exp()).collect();
        Matrix::from_vec(self.log_probs.rows(), self.log_probs.cols(), data)
    }
}

/// One recurrent-dropout mask per layer, fixed for a whole sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks(pub Vec<Vec<f64>>);

impl DropoutMasks {
    /// Samples inverted-dropout masks; `None` when dropout is disabled.
    pub fn sample<R: Rng>(config: &ModelConfig, rng: &mut R) -> Option<Self> {
        let p = config.recurrent_dropout;
        if p <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        let masks = (0..config.num_layers)
            .map(|_| {
                (0..config.hidden_dim)
                    .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                    .collect()
            })
            .collect();
        Some(DropoutMasks(masks))
    }
}

pub(crate) struct ForwardCache {
    word_ids: Vec<usize>,
    predicate: usize,
    layers: Vec<LayerCache>,
    pub dists: LabelDistributions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params,
}

impl Model {
    /// Fresh model with parameters drawn from the config seed's init stream.
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self, TaggerError> {
        config.validate()?;
        let mut rng = seed::rng(config.seed, Stream::Init, 0);
        let word_embedding = Matrix::uniform(vocab.len(), config.word_dim, 0.1, &mut rng);
        let predicate_embedding = Matrix::uniform(2, config.predicate_dim, 0.1, &mut rng);
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut input_dim = config.input_dim();
        for _ in 0..config.num_layers {
            layers.push(LayerParams::init(input_dim, config.hidden_dim, &mut rng));
            input_dim = config.hidden_dim;
        }
        let labels = config.labels().len();
        let bound = (6.0 / (labels + config.hidden_dim) as f64).sqrt();
        let output_weight = Matrix::uniform(labels, config.hidden_dim, bound, &mut rng);
        let params = Params {
            word_embedding,
            predicate_embedding,
            layers,
            output_weight,
            output_bias: Matrix::zeros(1, labels),
        };
        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    pub fn labels(&self) -> LabelSet {
        self.config.labels()
    }

    /// Input rows `[word embedding ; predicate-indicator embedding]`, where the
    /// indicator is on only at position `predicate`.
    pub fn embed(&self, sentence: &Sentence, predicate: usize) -> Matrix {
        self.embed_ids(&self.vocab.ids(&sentence.tokens), predicate)
    }

    fn embed_ids(&self, word_ids: &[usize], predicate: usize) -> Matrix {
        let wd = self.config.word_dim;
        let mut x = Matrix::zeros(word_ids.len(), self.config.input_dim());
        for (t, &w) in word_ids.iter().enumerate() {
            let row = x.row_mut(t);
            row[..wd].copy_from_slice(self.params.word_embedding.row(w));
            row[wd..].copy_from_slice(
                self.params
                    .predicate_embedding
                    .row(usize::from(t == predicate)),
            );
        }
        x
    }

    /// Label distributions for `(sentence, predicate)`. Passing masks runs the
    /// training-mode forward pass; `None` is the deterministic eval pass.
    pub fn forward(
        &self,
        sentence: &Sentence,
        predicate: usize,
        masks: Option<&DropoutMasks>,
    ) -> LabelDistributions {
        self.forward_cached(&self.vocab.ids(&sentence.tokens), predicate, masks)
            .dists
    }

    pub(crate) fn forward_cached(
        &self,
        word_ids: &[usize],
        predicate: usize,
        masks: Option<&DropoutMasks>,
    ) -> ForwardCache {
        let mut input = self.embed_ids(word_ids, predicate);
        let mut layers = Vec::with_capacity(self.params.layers.len());
        for (k, lp) in self.params.layers.iter().enumerate() {
            let mask = masks.map(|m| m.0[k].as_slice());
            let cache = layer_forward(lp, input, k % 2 == 1, mask);
            input = cache.output.clone();
            layers.push(cache);
        }
        let n = word_ids.len();
        let labels = self.params.output_weight.rows();
        let mut log_probs = Matrix::zeros(n, labels);
        for t in 0..n {
            let row = log_probs.row_mut(t);
            row.copy_from_slice(self.params.output_bias.row(0));
            mat_vec_acc(&self.params.output_weight, input.row(t), row);
            log_softmax_in_place(row);
        }
        ForwardCache {
            word_ids: word_ids.to_vec(),
            predicate,
            layers,
            dists: LabelDistributions { log_probs },
        }
    }

    /// Accumulates parameter gradients given `d_logits` (n × labels), the
    /// gradient of the loss with respect to the pre-softmax scores.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_logits: &Matrix, grads: &mut Params) {
        let last = &cache.layers.last().expect("at least one layer").output;
        let mut d_hidden = Matrix::zeros(last.rows(), last.cols());
        for t in 0..d_logits.rows() {
            let dl = d_logits.row(t);
            if dl.iter().all(|&v| v == 0.0) {
                continue;
            }
            matrix::outer_acc(dl, last.row(t), &mut grads.output_weight);
            matrix::axpy(1.0, dl, grads.output_bias.row_mut(0));
            vec_mat_acc(dl, &self.params.output_weight, d_hidden.row_mut(t));
        }
        let mut d = d_hidden;
        for (k, lc) in cache.layers.iter().enumerate().rev() {
            d = layer_backward(&self.params.layers[k], lc, &d, &mut grads.layers[k]);
        }
        let wd = self.config.word_dim;
        for (t, &w) in cache.word_ids.iter().enumerate() {
            let row = d.row(t);
            matrix::axpy(1.0, &row[..wd], grads.word_embedding.row_mut(w));
            let indicator = usize::from(t == cache.predicate);
            matrix::axpy(1.0, &row[wd..], grads.predicate_embedding.row_mut(indicator));
        }
    }

    pub fn zero_grads(&self) -> Params {
        Params::zeros_like(&self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocab;

    fn tiny() -> (Model, Sentence) {
        let vocab = Vocab::from_words(["a", "b", "c"].iter().map(|s| s.to_string()));
        let config = ModelConfig {
            word_dim: 4,
            predicate_dim: 3,
            hidden_dim: 5,
            num_layers: 3,
            recurrent_dropout: 0.2,
            max_args: 2,
            seed: 11,
        };
        let s = Sentence {
            id: "s".into(),
            tokens: ["a", "b", "zzz"].iter().map(|s| s.to_string()).collect(),
            candidate_predicates: vec![1],
        };
        (Model::new(config, vocab).unwrap(), s)
    }

    #[test]
    fn indicator_follows_predicate_position() {
        let (m, s) = tiny();
        let x = m.embed(&s, 1);
        let wd = m.config.word_dim;
        for t in 0..3 {
            let expected = m.params.predicate_embedding.row(usize::from(t == 1));
            assert_eq!(&x.row(t)[wd..], expected);
        }
        assert_eq!(&x.row(2)[..wd], m.params.word_embedding.row(Vocab::UNK_ID));
        let other = m.embed(&s, 2);
        for t in 0..3 {
            assert_eq!(&x.row(t)[..wd], &other.row(t)[..wd]);
        }
        assert_ne!(x.row(2)[wd..], other.row(2)[wd..]);
    }

    #[test]
    fn all_unknown_tokens_share_unknown_embedding() {
        let (m, mut s) = tiny();
        s.tokens = vec!["x".into(), "y".into()];
        let x = m.embed(&s, 0);
        assert_eq!(x.row(0)[..4], x.row(1)[..4]);
    }

    #[test]
    fn rows_are_distributions() {
        let (m, s) = tiny();
        let d = m.forward(&s, 1, None);
        let p = d.probs();
        for t in 0..p.rows() {
            let sum: f64 = p.row(t).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(p.row(t).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let (mut m, s) = tiny();
        m.params.output_weight.fill(0.0);
        m.params.output_bias.fill(0.0);
        let p = m.forward(&s, 0, None).probs();
        let l = m.labels().len() as f64;
        assert!(p.as_slice().iter().all(|&v| (v - 1.0 / l).abs() < 1e-15));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let (m, s) = tiny();
        let a = m.forward(&s, 1, None);
        let b = m.forward(&s, 1, None);
        let bits = |d: &LabelDistributions| -> Vec<u64> {
            d.log_probs().as_slice().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn dropout_masks_fixed_per_sequence_and_vary_between() {
        let (m, _) = tiny();
        let mut rng = seed::rng(1, Stream::Dropout, 0);
        let a = DropoutMasks::sample(&m.config, &mut rng).unwrap();
        let b = DropoutMasks::sample(&m.config, &mut rng).unwrap();
        assert_eq!(a.0.len(), m.config.num_layers);
        assert_ne!(a, b);
        let keep = 1.0 / (1.0 - m.config.recurrent_dropout);
        assert!(a.0.iter().flatten().all(|&v| v == 0.0 || v == keep));
    }

    #[test]
    fn config_validation() {
        let bad = ModelConfig {
            num_layers: 0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }
}
