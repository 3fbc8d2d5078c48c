//! Sigmoid calibration of raw classifier scores by Newton iteration on the
//! smoothed-target cross-entropy.

use serde::{Deserialize, Serialize};

use crate::math::{inv_logit, log1p_exp};

use super::UpstreamError;

const HESSIAN_RIDGE: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;
const MIN_STEP: f64 = 1e-12;

/// Fitted sigmoid map P(y=1 | s) = 1 / (1 + exp(a*s + b)). When higher
/// scores indicate the positive class the fitted `a` is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub a: f64,
    pub b: f64,
}

impl CalibrationModel {
    pub fn probability(&self, score: f64) -> f64 {
        inv_logit(-(self.a * score + self.b))
    }
}

/// Negative log-likelihood with smoothed targets; `f = a*s + b`.
fn objective(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let f = a * s + b;
            t * f + log1p_exp(-f)
        })
        .sum()
}

/// Fits the Platt sigmoid by Newton's method with Armijo backtracking.
/// Targets are smoothed to `(n_pos + 1) / (n_pos + 2)` for positives and
/// `1 / (n_neg + 2)` for negatives. Converged when the gradient infinity
/// norm drops below 1e-10; errors out after 200 iterations.
pub fn platt_fit(scores: &[f64], labels: &[bool]) -> Result<CalibrationModel, UpstreamError> {
    if scores.len() != labels.len() {
        return Err(UpstreamError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if scores.len() < 4 {
        return Err(UpstreamError::TooFewValues { needed: 4, got: scores.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(UpstreamError::SingleClass);
    }

    let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    let t_neg = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> =
        labels.iter().map(|&l| if l { t_pos } else { t_neg }).collect();

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut value = objective(scores, &targets, a, b);

    for _ in 0..MAX_ITERATIONS {
        let mut g_a = 0.0;
        let mut g_b = 0.0;
        let mut h_aa = HESSIAN_RIDGE;
        let mut h_bb = HESSIAN_RIDGE;
        let mut h_ab = 0.0;
        for (&s, &t) in scores.iter().zip(&targets) {
            let f = a * s + b;
            // p = P(y=1) = sigmoid(-f); dF/df = t - p; d2F/df2 = p(1-p).
            let p = inv_logit(-f);
            let w = p * (1.0 - p);
            let d = t - p;
            g_a += s * d;
            g_b += d;
            h_aa += s * s * w;
            h_bb += w;
            h_ab += s * w;
        }
        if g_a.abs().max(g_b.abs()) < GRAD_TOL {
            return Ok(CalibrationModel { a, b });
        }

        let det = h_aa * h_bb - h_ab * h_ab;
        let step_a = -(h_bb * g_a - h_ab * g_b) / det;
        let step_b = -(h_aa * g_b - h_ab * g_a) / det;
        let directional = g_a * step_a + g_b * step_b;

        if g_a.abs().max(g_b.abs()) < 1e-6 {
            // Inside the quadratic basin the objective decrease is below the
            // floating-point noise floor, so a line search cannot certify
            // progress; take the pure Newton step.
            a += step_a;
            b += step_b;
            value = objective(scores, &targets, a, b);
            continue;
        }

        let mut scale = 1.0;
        loop {
            let candidate_a = a + scale * step_a;
            let candidate_b = b + scale * step_b;
            let candidate = objective(scores, &targets, candidate_a, candidate_b);
            if candidate <= value + 1e-4 * scale * directional {
                a = candidate_a;
                b = candidate_b;
                value = candidate;
                break;
            }
            scale *= 0.5;
            if scale < MIN_STEP {
                return Err(UpstreamError::NoConvergence {
                    iterations: MAX_ITERATIONS,
                    a,
                    b,
                });
            }
        }
    }
    Err(UpstreamError::NoConvergence { iterations: MAX_ITERATIONS, a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_data_calibrates_half_at_zero() {
        let scores = [-1.0, -1.0, 1.0, 1.0];
        let labels = [false, false, true, true];
        let model = platt_fit(&scores, &labels).unwrap();
        assert!((model.probability(0.0) - 0.5).abs() < 1e-6);
        assert!(model.a < 0.0, "higher scores must raise the probability");
    }

    #[test]
    fn flipped_labels_complement_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scores: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| s + rng.random_range(-1.0..1.0) > 0.0).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            return;
        }
        let model = platt_fit(&scores, &labels).unwrap();
        let flipped: Vec<bool> = labels.iter().map(|&l| !l).collect();
        let complement = platt_fit(&scores, &flipped).unwrap();
        for &s in scores.iter().take(10) {
            let p = model.probability(s);
            let q = complement.probability(s);
            assert!((p + q - 1.0).abs() < 1e-6, "p {p} q {q}");
        }
    }

    #[test]
    fn single_class_or_short_inputs_error() {
        assert!(matches!(
            platt_fit(&[0.1, 0.2, 0.3, 0.4], &[true, true, true, true]),
            Err(UpstreamError::SingleClass)
        ));
        assert!(matches!(
            platt_fit(&[0.1, 0.2], &[true, false]),
            Err(UpstreamError::TooFewValues { .. })
        ));
        assert!(matches!(
            platt_fit(&[0.1; 5], &[true; 4]),
            Err(UpstreamError::LengthMismatch { .. })
        ));
    }

    /// Dense 2-D grid search plus local refinement over the same objective,
    /// used as the optimizer oracle.
    fn grid_search_oracle(scores: &[f64], labels: &[bool]) -> (f64, f64) {
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
        let t_neg = 1.0 / (n_neg + 2.0);
        let targets: Vec<f64> =
            labels.iter().map(|&l| if l { t_pos } else { t_neg }).collect();
        let mut center = (0.0, 0.0);
        let mut radius = 8.0;
        for _ in 0..24 {
            let mut best = (f64::INFINITY, center);
            for i in 0..=40 {
                for j in 0..=40 {
                    let a = center.0 - radius + 2.0 * radius * i as f64 / 40.0;
                    let b = center.1 - radius + 2.0 * radius * j as f64 / 40.0;
                    let v = objective(scores, &targets, a, b);
                    if v < best.0 {
                        best = (v, (a, b));
                    }
                }
            }
            center = best.1;
            radius *= 0.3;
        }
        center
    }

    #[test]
    fn newton_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(8..40);
            let slope = rng.random_range(0.5..2.5);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let labels: Vec<bool> = scores
                .iter()
                .map(|&s| rng.random::<f64>() < inv_logit(slope * s))
                .collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let model = platt_fit(&scores, &labels).unwrap();
            let (oa, ob) = grid_search_oracle(&scores, &labels);
            assert!(
                (model.a - oa).abs() < 1e-3 && (model.b - ob).abs() < 1e-3,
                "newton ({}, {}) vs grid ({oa}, {ob})",
                model.a,
                model.b
            );
        }
    }

    #[test]
    fn fit_is_a_grid_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scores: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.random::<f64>() < inv_logit(s)).collect();
        let model = platt_fit(&scores, &labels).unwrap();
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let targets: Vec<f64> = labels
            .iter()
            .map(|&l| if l { (n_pos + 1.0) / (n_pos + 2.0) } else { 1.0 / (n_neg + 2.0) })
            .collect();
        let at_fit = objective(&scores, &targets, model.a, model.b);
        for i in 0..201 {
            for j in 0..201 {
                let a = model.a + (i as f64 - 100.0) * 0.01;
                let b = model.b + (j as f64 - 100.0) * 0.01;
                assert!(objective(&scores, &targets, a, b) + 1e-9 >= at_fit);
            }
        }
    }
}
