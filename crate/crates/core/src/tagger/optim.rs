use super::{Params, TaggerError};

pub const ADADELTA_RHO: f64 = 0.95;
pub const ADADELTA_EPS: f64 = 1e-6;

/// One Adadelta update over flat slices:
///
/// ```text
/// E[g²] ← ρ E[g²] + (1 - ρ) g²
/// Δ     = -sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
/// E[Δ²] ← ρ E[Δ²] + (1 - ρ) Δ²
/// θ     ← θ + lr · Δ
/// ```
pub fn adadelta_update(
    param: &mut [f64],
    grad: &[f64],
    sq_grad: &mut [f64],
    sq_update: &mut [f64],
    rho: f64,
    eps: f64,
    lr: f64,
) {
    for i in 0..param.len() {
        let g = grad[i];
        sq_grad[i] = rho * sq_grad[i] + (1.0 - rho) * g * g;
        let delta = -((sq_update[i] + eps).sqrt() / (sq_grad[i] + eps).sqrt()) * g;
        sq_update[i] = rho * sq_update[i] + (1.0 - rho) * delta * delta;
        param[i] += lr * delta;
    }
}

/// Adadelta accumulators for a full parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct Adadelta {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
    pub sq_grad: Params,
    pub sq_update: Params,
}

impl Adadelta {
    pub fn new(params: &Params) -> Self {
        Adadelta {
            rho: ADADELTA_RHO,
            eps: ADADELTA_EPS,
            lr: 1.0,
            sq_grad: Params::zeros_like(params),
            sq_update: Params::zeros_like(params),
        }
    }

    /// Applies one update. Gradients are checked for finiteness first so a bad
    /// batch leaves parameters and accumulators untouched.
    pub fn step(&mut self, params: &mut Params, grads: &Params) -> Result<(), TaggerError> {
        if let Some(name) = grads.first_non_finite() {
            return Err(TaggerError::NonFiniteGradient(name));
        }
        let grad_arrays: Vec<&[f64]> = grads.named().into_iter().map(|(_, m)| m.as_slice()).collect();
        let mut sq_g = self.sq_grad.arrays_mut();
        let mut sq_u = self.sq_update.arrays_mut();
        let (rho, eps, lr) = (self.rho, self.eps, self.lr);
        params.for_each_mut(|i, m| {
            adadelta_update(
                m.as_mut_slice(),
                grad_arrays[i],
                sq_g[i].as_mut_slice(),
                sq_u[i].as_mut_slice(),
                rho,
                eps,
                lr,
            );
        });
        if let Some(name) = params.first_non_finite() {
            return Err(TaggerError::NonFiniteParameter(name));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameter_and_decays_accumulators() {
        let mut p = [3.0];
        let mut g2 = [0.5];
        let mut u2 = [0.25];
        adadelta_update(&mut p, &[0.0], &mut g2, &mut u2, ADADELTA_RHO, ADADELTA_EPS, 1.0);
        assert_eq!(p, [3.0]);
        assert_eq!(g2, [0.5 * ADADELTA_RHO]);
        assert_eq!(u2, [0.25 * ADADELTA_RHO]);
    }

    #[test]
    fn quadratic_loss_strictly_decreases() {
        // f(x) = (x - 2)^2 starting at x = 5.
        let f = |x: f64| (x - 2.0) * (x - 2.0);
        let mut x = [5.0];
        let (mut g2, mut u2) = ([0.0], [0.0]);
        let mut prev = f(x[0]);
        for step in 0..50 {
            let grad = [2.0 * (x[0] - 2.0)];
            adadelta_update(&mut x, &grad, &mut g2, &mut u2, ADADELTA_RHO, ADADELTA_EPS, 1.0);
            let now = f(x[0]);
            assert!(now < prev, "step {step}: {now} >= {prev}");
            prev = now;
        }
    }
}
