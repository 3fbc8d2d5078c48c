//! L2-regularized logistic regression fit by gradient descent, the scorer
//! sitting on top of the learned embeddings.

use serde::{Deserialize, Serialize};

use crate::math::{inv_logit, log1p_exp};

use super::UpstreamError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    /// L2 penalty on the weights (the intercept is not penalized).
    pub l2: f64,
    pub max_iterations: usize,
    /// Gradient infinity-norm at which the fit is declared converged.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        // Weak penalties leave the objective nearly flat around the optimum,
        // so plain gradient descent can need a long tail to push the gradient
        // under the tolerance.
        Self { l2: 1e-3, max_iterations: 2_000_000, tolerance: 1e-8 }
    }
}

/// Fitted logistic scorer P(y=1 | x) = logistic(w.x + c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn score(&self, features: &[f64]) -> f64 {
        let z: f64 =
            self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + self.intercept;
        inv_logit(z)
    }

    pub fn score_all(&self, features: &[Vec<f64>]) -> Vec<f64> {
        features.iter().map(|x| self.score(x)).collect()
    }
}

/// Mean penalized negative log-likelihood and its gradient.
fn objective_grad(
    features: &[Vec<f64>],
    labels: &[bool],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let dim = weights.len();
    let mut value = 0.0;
    let mut grad_w = vec![0.0; dim];
    let mut grad_c = 0.0;
    for (x, &label) in features.iter().zip(labels) {
        let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + intercept;
        let y = if label { 1.0 } else { 0.0 };
        value += log1p_exp(z) - y * z;
        let resid = inv_logit(z) - y;
        for (g, &v) in grad_w.iter_mut().zip(x) {
            *g += resid * v;
        }
        grad_c += resid;
    }
    value /= n;
    grad_c /= n;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    value += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (value, grad_w, grad_c)
}

/// Fits the scorer by gradient descent with Armijo backtracking until the
/// gradient infinity-norm falls below the tolerance.
pub fn logistic_fit(
    features: &[Vec<f64>],
    labels: &[bool],
    config: &LogisticConfig,
) -> Result<LogisticModel, UpstreamError> {
    if features.len() != labels.len() {
        return Err(UpstreamError::LengthMismatch { left: features.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(UpstreamError::SingleClass);
    }

    let dim = features[0].len();
    let mut weights = vec![0.0; dim];
    let mut intercept = 0.0;
    let (mut value, mut grad_w, mut grad_c) =
        objective_grad(features, labels, &weights, intercept, config.l2);
    let mut step = 1.0;

    for iteration in 0..config.max_iterations {
        let grad_norm = grad_w.iter().fold(grad_c.abs(), |m, g| m.max(g.abs()));
        if grad_norm < config.tolerance {
            return Ok(LogisticModel { weights, intercept });
        }
        let sq_norm: f64 = grad_w.iter().map(|g| g * g).sum::<f64>() + grad_c * grad_c;
        // Backtracking line search along the negative gradient; the step
        // carries over between iterations and is allowed to grow again. Once
        // the true per-step decrease falls below the objective's evaluation
        // noise, progress is certified by a shrinking gradient norm instead.
        let noise = 4.0 * f64::EPSILON * (1.0 + value.abs());
        step *= 2.0;
        loop {
            let cand_w: Vec<f64> =
                weights.iter().zip(&grad_w).map(|(w, g)| w - step * g).collect();
            let cand_c = intercept - step * grad_c;
            let (cand_v, cand_gw, cand_gc) =
                objective_grad(features, labels, &cand_w, cand_c, config.l2);
            let cand_sq_norm: f64 =
                cand_gw.iter().map(|g| g * g).sum::<f64>() + cand_gc * cand_gc;
            let armijo = cand_v <= value - 1e-4 * step * sq_norm;
            let noise_floor = cand_v <= value + noise && cand_sq_norm < sq_norm;
            if armijo || noise_floor {
                weights = cand_w;
                intercept = cand_c;
                value = cand_v;
                grad_w = cand_gw;
                grad_c = cand_gc;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                return Err(UpstreamError::NoConvergence {
                    iterations: iteration,
                    a: grad_norm,
                    b: value,
                });
            }
        }
    }
    let grad_norm = grad_w.iter().fold(grad_c.abs(), |m, g| m.max(g.abs()));
    if grad_norm < config.tolerance {
        Ok(LogisticModel { weights, intercept })
    } else {
        Err(UpstreamError::NoConvergence {
            iterations: config.max_iterations,
            a: grad_norm,
            b: value,
        })
    }
}
