use rand::Rng;

use super::matrix::Matrix;

/// Weights of one recurrent layer. Gate blocks inside the `5 * hidden` columns
/// are ordered input, forget, output, candidate, highway.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// input_dim × 5h
    pub input_weight: Matrix,
    /// h × 5h
    pub recurrent_weight: Matrix,
    /// 1 × 5h
    pub bias: Matrix,
    /// input_dim × h, the highway carry path.
    pub highway_projection: Matrix,
}

pub const GATES: usize = 5;
pub(crate) const GATE_INPUT: usize = 0;
pub(crate) const GATE_FORGET: usize = 1;
pub(crate) const GATE_OUTPUT: usize = 2;
pub(crate) const GATE_CANDIDATE: usize = 3;
pub(crate) const GATE_HIGHWAY: usize = 4;

pub const FORGET_BIAS: f64 = 1.0;
pub const HIGHWAY_BIAS: f64 = -1.0;

impl LayerParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LayerParams {
            input_weight: Matrix::zeros(input_dim, GATES * hidden),
            recurrent_weight: Matrix::zeros(hidden, GATES * hidden),
            bias: Matrix::zeros(1, GATES * hidden),
            highway_projection: Matrix::zeros(input_dim, hidden),
        }
    }

    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let glorot = |a: usize, b: usize| (6.0 / (a + b) as f64).sqrt();
        let mut bias = Matrix::zeros(1, GATES * hidden);
        bias.row_mut(0)[GATE_FORGET * hidden..(GATE_FORGET + 1) * hidden].fill(FORGET_BIAS);
        bias.row_mut(0)[GATE_HIGHWAY * hidden..].fill(HIGHWAY_BIAS);
        LayerParams {
            input_weight: Matrix::uniform(input_dim, GATES * hidden, glorot(input_dim, hidden), rng),
            recurrent_weight: Matrix::uniform(hidden, GATES * hidden, glorot(hidden, hidden), rng),
            bias,
            highway_projection: Matrix::uniform(input_dim, hidden, glorot(input_dim, hidden), rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.highway_projection.cols()
    }
}

/// Every trainable array of the tagger. Gradients and optimizer accumulators
/// reuse this type.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub word_embedding: Matrix,
    /// Two rows: not-the-predicate, the-predicate.
    pub predicate_embedding: Matrix,
    pub layers: Vec<LayerParams>,
    /// labels × hidden
    pub output_weight: Matrix,
    /// 1 × labels
    pub output_bias: Matrix,
}

impl Params {
    pub fn zeros_like(other: &Params) -> Params {
        let mut p = other.clone();
        p.for_each_mut(|_, m| m.fill(0.0));
        p
    }

    pub fn named(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("word_embedding".to_string(), &self.word_embedding),
            ("predicate_embedding".to_string(), &self.predicate_embedding),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.input_weight"), &l.input_weight));
            out.push((format!("layer{i}.recurrent_weight"), &l.recurrent_weight));
            out.push((format!("layer{i}.bias"), &l.bias));
            out.push((format!("layer{i}.highway_projection"), &l.highway_projection));
        }
        out.push(("output.weight".to_string(), &self.output_weight));
        out.push(("output.bias".to_string(), &self.output_bias));
        out
    }

    /// Visits every array mutably, in the same order as [`Params::named`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, &mut Matrix)) {
        let mut i = 0;
        let mut visit = |m: &mut Matrix| {
            f(i, m);
            i += 1;
        };
        visit(&mut self.word_embedding);
        visit(&mut self.predicate_embedding);
        for l in &mut self.layers {
            visit(&mut l.input_weight);
            visit(&mut l.recurrent_weight);
            visit(&mut l.bias);
            visit(&mut l.highway_projection);
        }
        visit(&mut self.output_weight);
        visit(&mut self.output_bias);
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = vec![&mut self.word_embedding, &mut self.predicate_embedding];
        for l in &mut self.layers {
            out.push(&mut l.input_weight);
            out.push(&mut l.recurrent_weight);
            out.push(&mut l.bias);
            out.push(&mut l.highway_projection);
        }
        out.push(&mut self.output_weight);
        out.push(&mut self.output_bias);
        out
    }

    pub fn add_assign(&mut self, other: &Params) {
        let others: Vec<&Matrix> = other.named().into_iter().map(|(_, m)| m).collect();
        self.for_each_mut(|i, m| m.add_assign(others[i]));
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_mut(|_, m| m.scale(s));
    }

    pub fn num_values(&self) -> usize {
        self.named().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    /// Name of the first array holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named()
            .into_iter()
            .find(|(_, m)| !m.is_finite())
            .map(|(n, _)| n)
    }

    pub fn max_abs(&self) -> f64 {
        self.named()
            .iter()
            .flat_map(|(_, m)| m.as_slice().iter())
            .fold(0.0, |a, &b| a.max(b.abs()))
    }
}
