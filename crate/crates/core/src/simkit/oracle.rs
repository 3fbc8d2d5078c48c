//! Deterministic posterior oracle for the one-gamer, one-modality model with
//! fixed hyper-parameters, plus the matching 1-D sampler target.

use thiserror::Error;

use crate::math::{inv_logit, log1p_exp, normal_lpdf, std_normal_lpdf};
use crate::sampler::LogDensityGradient;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("scales must be strictly positive")]
    NonPositiveScale,
    #[error("need at least {needed} grid nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("posterior mass reaches the grid edge; widen the grid")]
    GridTooNarrow,
    #[error("grid weights underflowed to zero; widen or recenter the grid")]
    GridUnderflow,
}

/// Quadrature of the 1-D posterior of a single latent effect with fixed
/// hyper-parameters: prior Normal(prior_mean, prior_scale), logit likelihood
/// Normal(effect, noise_scale) per observation, and optionally one Bernoulli
/// rank observation through the logistic link.
///
/// The grid is centered at the conjugate Gaussian-part posterior mean and
/// spans ten prior scales each way. With no rank term this reproduces the
/// Normal-Normal closed form: posterior precision `1/prior_scale^2 +
/// n/noise_scale^2`.
///
/// Returns the posterior mean and standard deviation of the effect.
pub fn grid_posterior_oracle(
    prior_mean: f64,
    prior_scale: f64,
    noise_scale: f64,
    logits: &[f64],
    rank: Option<bool>,
    nodes: usize,
) -> Result<(f64, f64), OracleError> {
    if !(prior_scale > 0.0) || !(noise_scale > 0.0) {
        return Err(OracleError::NonPositiveScale);
    }
    if nodes < 10_000 {
        return Err(OracleError::TooFewNodes { needed: 10_000, got: nodes });
    }

    let count = logits.len() as f64;
    let precision = 1.0 / (prior_scale * prior_scale)
        + count / (noise_scale * noise_scale);
    let logit_sum: f64 = logits.iter().sum();
    let center = (prior_mean / (prior_scale * prior_scale)
        + logit_sum / (noise_scale * noise_scale))
        / precision;
    let half_width = 10.0 * prior_scale;

    let log_density = |eta: f64| -> f64 {
        let mut lp = normal_lpdf(eta, prior_mean, prior_scale);
        for &l in logits {
            lp += normal_lpdf(l, eta, noise_scale);
        }
        if let Some(rank_a) = rank {
            lp += if rank_a { -log1p_exp(-eta) } else { -log1p_exp(eta) };
        }
        lp
    };

    let step = 2.0 * half_width / (nodes - 1) as f64;
    let mut log_weights = Vec::with_capacity(nodes);
    let mut max_lw = f64::NEG_INFINITY;
    for k in 0..nodes {
        let eta = center - half_width + step * k as f64;
        let lw = log_density(eta);
        max_lw = max_lw.max(lw);
        log_weights.push(lw);
    }
    if max_lw == f64::NEG_INFINITY {
        return Err(OracleError::GridUnderflow);
    }

    let mut total = 0.0;
    let mut mean_acc = 0.0;
    for (k, lw) in log_weights.iter().enumerate() {
        let eta = center - half_width + step * k as f64;
        // Trapezoid weights: endpoints count half.
        let trapezoid = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        let w = trapezoid * (lw - max_lw).exp();
        total += w;
        mean_acc += w * eta;
    }
    if total == 0.0 {
        return Err(OracleError::GridUnderflow);
    }
    let edge = (log_weights[0] - max_lw).exp().max((log_weights[nodes - 1] - max_lw).exp());
    if edge > 1e-10 {
        return Err(OracleError::GridTooNarrow);
    }

    let mean = mean_acc / total;
    let mut var_acc = 0.0;
    for (k, lw) in log_weights.iter().enumerate() {
        let eta = center - half_width + step * k as f64;
        let trapezoid = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        var_acc += trapezoid * (lw - max_lw).exp() * (eta - mean) * (eta - mean);
    }
    Ok((mean, (var_acc / total).sqrt()))
}

/// The same tiny model as a 1-D unconstrained sampler target over the
/// standardized effect z, with `effect = prior_mean + prior_scale * z`.
#[derive(Debug, Clone)]
pub struct FixedHyperModel {
    pub prior_mean: f64,
    pub prior_scale: f64,
    pub noise_scale: f64,
    pub logits: Vec<f64>,
    pub rank: Option<bool>,
}

impl FixedHyperModel {
    pub fn effect_from_z(&self, z: f64) -> f64 {
        self.prior_mean + self.prior_scale * z
    }
}

impl LogDensityGradient for FixedHyperModel {
    fn dim(&self) -> usize {
        1
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Option<f64> {
        let z = position[0];
        if !z.is_finite() {
            return None;
        }
        let eta = self.effect_from_z(z);
        let mut lp = std_normal_lpdf(z);
        let mut d_eta = 0.0;
        for &l in &self.logits {
            lp += normal_lpdf(l, eta, self.noise_scale);
            d_eta += (l - eta) / (self.noise_scale * self.noise_scale);
        }
        if let Some(rank_a) = self.rank {
            lp += if rank_a { -log1p_exp(-eta) } else { -log1p_exp(eta) };
            let r = if rank_a { 1.0 } else { 0.0 };
            d_eta += r - inv_logit(eta);
        }
        grad[0] = -z + d_eta * self.prior_scale;
        if lp.is_finite() && grad[0].is_finite() {
            Some(lp)
        } else {
            None
        }
    }
}
