//! Highway LSTM layers and their backward pass.
//!
//! Per step, with `h̃ = mask ⊙ h_prev` and gates from `z = x·Wx + h̃·Wh + b`:
//!
//! ```text
//! c = i ⊙ g + f ⊙ c_prev
//! m = o ⊙ tanh(c)
//! h = r ⊙ m + (1 - r) ⊙ (x·Wp)
//! ```
//!
//! `h` is both the layer output and the recurrent state. Odd layers run
//! right-to-left.

use super::matrix::{axpy, mat_vec_acc, outer_acc, sigmoid, vec_mat_acc, Matrix};
use super::params::{
    LayerParams, GATES, GATE_CANDIDATE, GATE_FORGET, GATE_HIGHWAY, GATE_INPUT, GATE_OUTPUT,
};

pub(crate) struct LayerCache {
    pub input: Matrix,
    /// Post-activation gate values, n × 5h.
    pub gates: Matrix,
    pub cell: Matrix,
    pub tanh_cell: Matrix,
    pub carry: Matrix,
    /// Masked previous state fed into the recurrence, n × h.
    pub recurrent_in: Matrix,
    pub output: Matrix,
    pub backward: bool,
    pub mask: Option<Vec<f64>>,
}

fn order(n: usize, backward: bool) -> Box<dyn Iterator<Item = usize>> {
    if backward {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    }
}

pub(crate) fn layer_forward(
    p: &LayerParams,
    input: Matrix,
    backward: bool,
    mask: Option<&[f64]>,
) -> LayerCache {
    let n = input.rows();
    let h = p.hidden();
    let mut gates = Matrix::zeros(n, GATES * h);
    let mut cell = Matrix::zeros(n, h);
    let mut tanh_cell = Matrix::zeros(n, h);
    let mut carry = Matrix::zeros(n, h);
    let mut recurrent_in = Matrix::zeros(n, h);
    let mut output = Matrix::zeros(n, h);

    let mut prev_h = vec![0.0; h];
    let mut prev_c = vec![0.0; h];
    let mut z = vec![0.0; GATES * h];
    for t in order(n, backward) {
        let x = input.row(t);
        let rin = recurrent_in.row_mut(t);
        match mask {
            Some(m) => rin.iter_mut().zip(prev_h.iter().zip(m)).for_each(|(r, (a, b))| *r = a * b),
            None => rin.copy_from_slice(&prev_h),
        }
        z.copy_from_slice(p.bias.row(0));
        vec_mat_acc(x, &p.input_weight, &mut z);
        vec_mat_acc(recurrent_in.row(t), &p.recurrent_weight, &mut z);
        vec_mat_acc(x, &p.highway_projection, carry.row_mut(t));

        let g = gates.row_mut(t);
        for k in 0..GATES * h {
            g[k] = if k / h == GATE_CANDIDATE {
                z[k].tanh()
            } else {
                sigmoid(z[k])
            };
        }
        for j in 0..h {
            let c = g[GATE_INPUT * h + j] * g[GATE_CANDIDATE * h + j]
                + g[GATE_FORGET * h + j] * prev_c[j];
            let tc = c.tanh();
            let m = g[GATE_OUTPUT * h + j] * tc;
            let r = g[GATE_HIGHWAY * h + j];
            cell.set(t, j, c);
            tanh_cell.set(t, j, tc);
            output.set(t, j, r * m + (1.0 - r) * carry.get(t, j));
        }
        prev_h.copy_from_slice(output.row(t));
        prev_c.copy_from_slice(cell.row(t));
    }
    LayerCache {
        input,
        gates,
        cell,
        tanh_cell,
        carry,
        recurrent_in,
        output,
        backward,
        mask: mask.map(<[f64]>::to_vec),
    }
}

/// Backpropagates `d_output` (n × h) through one layer, accumulating into
/// `grads` and returning the gradient with respect to the layer input.
pub(crate) fn layer_backward(
    p: &LayerParams,
    cache: &LayerCache,
    d_output: &Matrix,
    grads: &mut LayerParams,
) -> Matrix {
    let n = cache.input.rows();
    let h = p.hidden();
    let mut d_input = Matrix::zeros(n, cache.input.cols());
    let mut dh_rec = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; GATES * h];
    let mut dcarry = vec![0.0; h];
    let mut dh_in = vec![0.0; h];

    // Reverse of the processing order; "previous" is the step processed before t.
    let steps: Vec<usize> = order(n, cache.backward).collect();
    for (k, &t) in steps.iter().enumerate().rev() {
        let prev = if k > 0 { Some(steps[k - 1]) } else { None };
        let g = cache.gates.row(t);
        for j in 0..h {
            let dh = d_output.get(t, j) + dh_rec[j];
            let i = g[GATE_INPUT * h + j];
            let f = g[GATE_FORGET * h + j];
            let o = g[GATE_OUTPUT * h + j];
            let cand = g[GATE_CANDIDATE * h + j];
            let r = g[GATE_HIGHWAY * h + j];
            let tc = cache.tanh_cell.get(t, j);
            let m = o * tc;
            let c_prev = prev.map_or(0.0, |pt| cache.cell.get(pt, j));

            let dr = dh * (m - cache.carry.get(t, j));
            let dm = dh * r;
            dcarry[j] = dh * (1.0 - r);
            let dc = dm * o * (1.0 - tc * tc) + dc_next[j];
            dz[GATE_HIGHWAY * h + j] = dr * r * (1.0 - r);
            dz[GATE_OUTPUT * h + j] = dm * tc * o * (1.0 - o);
            dz[GATE_INPUT * h + j] = dc * cand * i * (1.0 - i);
            dz[GATE_FORGET * h + j] = dc * c_prev * f * (1.0 - f);
            dz[GATE_CANDIDATE * h + j] = dc * i * (1.0 - cand * cand);
            dc_next[j] = dc * f;
        }
        let x = cache.input.row(t);
        outer_acc(x, &dz, &mut grads.input_weight);
        outer_acc(cache.recurrent_in.row(t), &dz, &mut grads.recurrent_weight);
        axpy(1.0, &dz, grads.bias.row_mut(0));
        outer_acc(x, &dcarry, &mut grads.highway_projection);

        let dx = d_input.row_mut(t);
        mat_vec_acc(&p.input_weight, &dz, dx);
        mat_vec_acc(&p.highway_projection, &dcarry, dx);

        dh_in.fill(0.0);
        mat_vec_acc(&p.recurrent_weight, &dz, &mut dh_in);
        match &cache.mask {
            Some(mask) => {
                for j in 0..h {
                    dh_rec[j] = dh_in[j] * mask[j];
                }
            }
            None => dh_rec.copy_from_slice(&dh_in),
        }
    }
    d_input
}
