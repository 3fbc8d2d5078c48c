//! Joint log-posterior of the pooling model and its analytic gradient, in
//! unconstrained coordinates.
//!
//! Up to no additive constant being dropped, the density is
//!
//! ```text
//!   sum_m [ N(mu_m | mu_loc, mu_scale) + HN(sigma_m | sigma_scale)
//!           + HN(tau_m | tau_scale) + log sigma_m + log tau_m ]   (Jacobians)
//! + sum_{i,m} N(z_im | 0, 1)
//! + sum_{observed (i,t,m)} N(l_itm | eta_im, tau_m)
//! + sum_{validation i} Bernoulli(r_i | logistic(sum_m eta_im))
//! ```
//!
//! with `eta_im = mu_m + sigma_m * z_im` in the non-centered form. Train-split
//! rank observations contribute nothing. The Bernoulli probability is clamped
//! into [1e-12, 1 - 1e-12]; inside the clamp the gradient of the term with
//! respect to the linear predictor is `r - p`, at the clamp it is zero.

use crate::math::{half_normal_lpdf, inv_logit, log1p_exp, normal_lpdf, std_normal_lpdf, LN_2PI};

use super::{
    Dataset, HyperPriors, ModelError, ParameterIndex, ParameterVector, Parameterization,
};

const PROB_CLAMP: f64 = 1e-12;

/// Bernoulli log-likelihood on the logit scale with probability clamping.
/// Returns the log-likelihood and its derivative with respect to `q`.
fn bernoulli_logit(rank_a: bool, q: f64) -> (f64, f64) {
    let p = inv_logit(q);
    if p < PROB_CLAMP {
        let ll = if rank_a { PROB_CLAMP.ln() } else { (-PROB_CLAMP).ln_1p() };
        (ll, 0.0)
    } else if p > 1.0 - PROB_CLAMP {
        let ll = if rank_a { (-PROB_CLAMP).ln_1p() } else { PROB_CLAMP.ln() };
        (ll, 0.0)
    } else {
        let ll = if rank_a { -log1p_exp(-q) } else { -log1p_exp(q) };
        let r = if rank_a { 1.0 } else { 0.0 };
        (ll, r - p)
    }
}

/// Core evaluation. Returns `None` when any intermediate quantity is
/// non-finite (overflowing scales, infinite positions); the sampler treats
/// that as a divergence signal.
fn density_impl(
    params: &[f64],
    dataset: &Dataset,
    priors: &HyperPriors,
    index: &ParameterIndex,
    grad: &mut [f64],
) -> Option<f64> {
    let n = index.n_gamers();
    let m_count = index.n_modalities();
    grad.fill(0.0);

    let mut sigma = Vec::with_capacity(m_count);
    let mut tau = Vec::with_capacity(m_count);
    let mut inv_tau_sq = Vec::with_capacity(m_count);
    let mut value = 0.0;

    for m in 0..m_count {
        let mu = params[index.mu_slot(m)];
        let log_s = params[index.log_sigma_slot(m)];
        let log_t = params[index.log_tau_slot(m)];
        let s = log_s.exp();
        let t = log_t.exp();
        if !s.is_finite() || !t.is_finite() || s == 0.0 || t == 0.0 {
            return None;
        }
        sigma.push(s);
        tau.push(t);
        inv_tau_sq.push(1.0 / (t * t));

        value += normal_lpdf(mu, priors.mu_loc, priors.mu_scale);
        grad[index.mu_slot(m)] += -(mu - priors.mu_loc) / (priors.mu_scale * priors.mu_scale);

        value += half_normal_lpdf(s, priors.sigma_scale) + log_s;
        grad[index.log_sigma_slot(m)] +=
            1.0 - s * s / (priors.sigma_scale * priors.sigma_scale);

        value += half_normal_lpdf(t, priors.tau_scale) + log_t;
        grad[index.log_tau_slot(m)] += 1.0 - t * t / (priors.tau_scale * priors.tau_scale);
    }

    // Effect priors and the Gaussian logit likelihood, via per-pair
    // sufficient statistics. Skill sums are collected for the rank terms.
    let mut skill = vec![0.0; n];
    for g in 0..n {
        let mut skill_g = 0.0;
        for m in 0..m_count {
            let slot = index.effect_slot(g, m);
            let raw = params[slot];
            let mu = params[index.mu_slot(m)];
            let eta;
            match index.parameterization() {
                Parameterization::NonCentered => {
                    eta = mu + sigma[m] * raw;
                    value += std_normal_lpdf(raw);
                    grad[slot] += -raw;
                }
                Parameterization::Centered => {
                    eta = raw;
                    let resid = (eta - mu) / sigma[m];
                    value += normal_lpdf(eta, mu, sigma[m]);
                    grad[slot] += -resid / sigma[m];
                    grad[index.mu_slot(m)] += resid / sigma[m];
                    grad[index.log_sigma_slot(m)] += resid * resid - 1.0;
                }
            }
            skill_g += eta;

            let stats = dataset.pair_stats(g, m);
            if stats.count > 0 {
                let count = stats.count as f64;
                let dev = stats.mean - eta;
                let ssr = stats.centered_sq_sum + count * dev * dev;
                value += -count * (0.5 * LN_2PI + params[index.log_tau_slot(m)])
                    - 0.5 * ssr * inv_tau_sq[m];
                let d_eta = count * dev * inv_tau_sq[m];
                match index.parameterization() {
                    Parameterization::NonCentered => {
                        grad[slot] += d_eta * sigma[m];
                        grad[index.mu_slot(m)] += d_eta;
                        grad[index.log_sigma_slot(m)] += d_eta * raw * sigma[m];
                    }
                    Parameterization::Centered => {
                        grad[slot] += d_eta;
                    }
                }
                grad[index.log_tau_slot(m)] += ssr * inv_tau_sq[m] - count;
            }
        }
        skill[g] = skill_g;
    }

    for &(g, rank_a) in dataset.validation_ranks() {
        let (ll, dq) = bernoulli_logit(rank_a, skill[g]);
        value += ll;
        if dq != 0.0 {
            for m in 0..m_count {
                let slot = index.effect_slot(g, m);
                match index.parameterization() {
                    Parameterization::NonCentered => {
                        grad[slot] += dq * sigma[m];
                        grad[index.mu_slot(m)] += dq;
                        grad[index.log_sigma_slot(m)] += dq * params[slot] * sigma[m];
                    }
                    Parameterization::Centered => {
                        grad[slot] += dq;
                    }
                }
            }
        }
    }

    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some(value)
}

/// Log-posterior value and gradient for a finite parameter point, in the
/// requested parameterization. `grad` must have length `index.dim()`.
pub fn log_posterior_with(
    params: &[f64],
    dataset: &Dataset,
    priors: &HyperPriors,
    parameterization: Parameterization,
    grad: &mut [f64],
) -> Result<f64, ModelError> {
    let index = ParameterIndex::for_dataset_with(dataset, parameterization);
    if params.len() != index.dim() || grad.len() != index.dim() {
        return Err(ModelError::DimensionMismatch { expected: index.dim(), got: params.len() });
    }
    if let Some(position) = params.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteParameter { position });
    }
    density_impl(params, dataset, priors, &index, grad)
        .ok_or_else(|| ModelError::NonFiniteDensity { location: params.to_vec() })
}

/// Log-posterior value and gradient in the default non-centered
/// parameterization.
pub fn log_posterior(
    params: &ParameterVector,
    dataset: &Dataset,
    priors: &HyperPriors,
) -> Result<(f64, Vec<f64>), ModelError> {
    let index = ParameterIndex::for_dataset(dataset);
    let mut grad = vec![0.0; index.dim()];
    let value = log_posterior_with(
        params.as_slice(),
        dataset,
        priors,
        Parameterization::NonCentered,
        &mut grad,
    )?;
    Ok((value, grad))
}

/// Sampler-facing view of the model: a pure log-density-with-gradient over
/// the unconstrained space. Shared immutably across chains.
#[derive(Debug, Clone)]
pub struct PooledDensity<'a> {
    dataset: &'a Dataset,
    priors: HyperPriors,
    index: ParameterIndex,
}

impl<'a> PooledDensity<'a> {
    pub fn new(dataset: &'a Dataset, priors: HyperPriors) -> Self {
        Self::with_parameterization(dataset, priors, Parameterization::NonCentered)
    }

    pub fn with_parameterization(
        dataset: &'a Dataset,
        priors: HyperPriors,
        parameterization: Parameterization,
    ) -> Self {
        let index = ParameterIndex::for_dataset_with(dataset, parameterization);
        Self { dataset, priors, index }
    }

    pub fn index(&self) -> &ParameterIndex {
        &self.index
    }
}

impl crate::sampler::LogDensityGradient for PooledDensity<'_> {
    fn dim(&self) -> usize {
        self.index.dim()
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Option<f64> {
        if position.iter().any(|v| !v.is_finite()) {
            return None;
        }
        density_impl(position, self.dataset, &self.priors, &self.index, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GamerId, LogitObservation, ModalityId, RankObservation, Split};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn gid(s: &str) -> GamerId {
        GamerId::new(s).unwrap()
    }

    fn mid(s: &str) -> ModalityId {
        ModalityId::new(s).unwrap()
    }

    fn priors() -> HyperPriors {
        HyperPriors::default()
    }

    /// Term-by-term reference evaluation, written directly from the density
    /// definition with no sufficient statistics. Independent of the
    /// implementation path under test.
    fn reference_log_posterior(params: &[f64], dataset: &Dataset, priors: &HyperPriors) -> f64 {
        let index = ParameterIndex::for_dataset(dataset);
        let n = dataset.n_gamers();
        let m_count = dataset.n_modalities();
        let mut value = 0.0;
        for m in 0..m_count {
            let mu = params[index.mu_slot(m)];
            let s = params[index.log_sigma_slot(m)].exp();
            let t = params[index.log_tau_slot(m)].exp();
            value += normal_lpdf(mu, priors.mu_loc, priors.mu_scale);
            value += half_normal_lpdf(s, priors.sigma_scale) + s.ln();
            value += half_normal_lpdf(t, priors.tau_scale) + t.ln();
        }
        for g in 0..n {
            for m in 0..m_count {
                value += std_normal_lpdf(params[index.effect_slot(g, m)]);
            }
        }
        for obs in dataset.logits() {
            let g = dataset.gamer_index(&obs.gamer).unwrap();
            let m = dataset.modality_index(&obs.modality).unwrap();
            let mu = params[index.mu_slot(m)];
            let s = params[index.log_sigma_slot(m)].exp();
            let t = params[index.log_tau_slot(m)].exp();
            let eta = mu + s * params[index.effect_slot(g, m)];
            value += normal_lpdf(obs.logit, eta, t);
        }
        for &(g, rank_a) in dataset.validation_ranks() {
            let mut q = 0.0;
            for m in 0..m_count {
                let mu = params[index.mu_slot(m)];
                let s = params[index.log_sigma_slot(m)].exp();
                q += mu + s * params[index.effect_slot(g, m)];
            }
            let p = inv_logit(q).clamp(1e-12, 1.0 - 1e-12);
            value += if rank_a { p.ln() } else { (1.0 - p).ln() };
        }
        value
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Dataset {
        let gamers: Vec<GamerId> = (0..n).map(|i| gid(&format!("g{i}"))).collect();
        let mods: Vec<ModalityId> = (0..m).map(|i| mid(&format!("m{i}"))).collect();
        let mut logits = Vec::new();
        for g in &gamers {
            for md in &mods {
                let count = rng.random_range(0..4);
                for t in 0..count {
                    logits.push(LogitObservation {
                        gamer: g.clone(),
                        modality: md.clone(),
                        datapoint: t,
                        logit: rng.random_range(-3.0..3.0),
                    });
                }
            }
        }
        let mut ranks = Vec::new();
        for g in &gamers {
            if rng.random::<f64>() < 0.7 {
                let split = if rng.random::<f64>() < 0.5 { Split::Train } else { Split::Validation };
                ranks.push(RankObservation {
                    gamer: g.clone(),
                    rank_a: rng.random::<f64>() < 0.5,
                    split,
                });
            }
        }
        Dataset::new(gamers, mods, logits, ranks).unwrap()
    }

    fn finite_difference_grad(
        params: &[f64],
        dataset: &Dataset,
        priors: &HyperPriors,
        parameterization: Parameterization,
    ) -> Vec<f64> {
        let h = 1e-5;
        let dim = params.len();
        let mut scratch = vec![0.0; dim];
        let mut fd = vec![0.0; dim];
        let mut point = params.to_vec();
        for j in 0..dim {
            let orig = point[j];
            point[j] = orig + h;
            let hi =
                log_posterior_with(&point, dataset, priors, parameterization, &mut scratch)
                    .unwrap();
            point[j] = orig - h;
            let lo =
                log_posterior_with(&point, dataset, priors, parameterization, &mut scratch)
                    .unwrap();
            point[j] = orig;
            fd[j] = (hi - lo) / (2.0 * h);
        }
        fd
    }

    fn assert_grad_close(analytic: &[f64], fd: &[f64]) {
        for (j, (&a, &f)) in analytic.iter().zip(fd).enumerate() {
            let tol = 1e-5 * a.abs().max(f.abs()) + 1e-7;
            assert!((a - f).abs() <= tol, "slot {j}: analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn prior_only_value_matches_reference() {
        // No logits and no validation ranks: the density is the prior alone.
        let ds = Dataset::new(
            vec![gid("a"), gid("b")],
            vec![mid("chat"), mid("video")],
            vec![],
            vec![],
        )
        .unwrap();
        let index = ParameterIndex::for_dataset(&ds);
        let params = ParameterVector::zeros(index.dim());
        let (value, _) = log_posterior(&params, &ds, &priors()).unwrap();

        // Independent closed-form sum at the zero point: per modality the
        // mu prior at 0, two half-normal priors at 1 with zero Jacobian, and
        // a standard normal prior per effect slot at 0.
        let per_modality = (-0.5 * LN_2PI - 2.5f64.ln())
            + 2.0 * (0.5 * (2.0 / std::f64::consts::PI).ln() - 0.5);
        let expected = 2.0 * per_modality + 4.0 * (-0.5 * LN_2PI);
        assert!((value - expected).abs() < 1e-12, "{value} vs {expected}");
        assert!((value - reference_log_posterior(params.as_slice(), &ds, &priors())).abs() < 1e-12);
    }

    #[test]
    fn value_matches_reference_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (n, m) = (rng.random_range(1..5), rng.random_range(1..4));
            let ds = random_dataset(&mut rng, n, m);
            let index = ParameterIndex::for_dataset(&ds);
            let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let pv = ParameterVector::new(params.clone()).unwrap();
            let (value, _) = log_posterior(&pv, &ds, &priors()).unwrap();
            let reference = reference_log_posterior(&params, &ds, &priors());
            assert!(
                (value - reference).abs() <= 1e-9 * value.abs().max(1.0),
                "{value} vs {reference}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let (n, m) = (rng.random_range(1..6), rng.random_range(1..4));
            let ds = random_dataset(&mut rng, n, m);
            let index = ParameterIndex::for_dataset(&ds);
            let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut grad = vec![0.0; index.dim()];
            log_posterior_with(&params, &ds, &priors(), Parameterization::NonCentered, &mut grad)
                .unwrap();
            let fd = finite_difference_grad(&params, &ds, &priors(), Parameterization::NonCentered);
            assert_grad_close(&grad, &fd);
            let _ = trial;
        }
    }

    #[test]
    fn centered_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let (n, m) = (rng.random_range(1..5), rng.random_range(1..3));
            let ds = random_dataset(&mut rng, n, m);
            let index = ParameterIndex::for_dataset_with(&ds, Parameterization::Centered);
            let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut grad = vec![0.0; index.dim()];
            log_posterior_with(&params, &ds, &priors(), Parameterization::Centered, &mut grad)
                .unwrap();
            let fd = finite_difference_grad(&params, &ds, &priors(), Parameterization::Centered);
            assert_grad_close(&grad, &fd);
        }
    }

    #[test]
    fn residual_zero_kills_effect_gradient() {
        // One gamer, one modality, one logit equal to the effect: the
        // likelihood contribution to the z-gradient vanishes, leaving the
        // prior pull -z.
        let ds = Dataset::new(
            vec![gid("a")],
            vec![mid("chat")],
            vec![LogitObservation {
                gamer: gid("a"),
                modality: mid("chat"),
                datapoint: 0,
                logit: 1.1, // mu + sigma * z = 0.6 + 1.0 * 0.5 = 1.1
            }],
            vec![],
        )
        .unwrap();
        let index = ParameterIndex::for_dataset(&ds);
        let mut values = vec![0.0; index.dim()];
        values[index.effect_slot(0, 0)] = 0.5;
        values[index.mu_slot(0)] = 0.6;
        let pv = ParameterVector::new(values).unwrap();
        let (_, grad) = log_posterior(&pv, &ds, &priors()).unwrap();
        // Only the prior term remains.
        assert!((grad[index.effect_slot(0, 0)] - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn train_ranks_are_inert() {
        let gamers = vec![gid("a"), gid("b")];
        let mods = vec![mid("chat")];
        let logits = vec![LogitObservation {
            gamer: gid("a"),
            modality: mid("chat"),
            datapoint: 0,
            logit: 0.8,
        }];
        let with_train = Dataset::new(
            gamers.clone(),
            mods.clone(),
            logits.clone(),
            vec![RankObservation { gamer: gid("b"), rank_a: true, split: Split::Train }],
        )
        .unwrap();
        let without = Dataset::new(gamers, mods, logits, vec![]).unwrap();
        let index = ParameterIndex::for_dataset(&with_train);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let pv = ParameterVector::new(params).unwrap();
            let a = log_posterior(&pv, &with_train, &priors()).unwrap();
            let b = log_posterior(&pv, &without, &priors()).unwrap();
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.len(), b.1.len());
            for (x, y) in a.1.iter().zip(&b.1) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn unobserved_pairs_keep_prior_gradient() {
        // Gamer b has no logits and no validation rank; its z-gradient is
        // exactly -z.
        let ds = Dataset::new(
            vec![gid("a"), gid("b")],
            vec![mid("chat"), mid("video")],
            vec![LogitObservation {
                gamer: gid("a"),
                modality: mid("chat"),
                datapoint: 0,
                logit: 0.4,
            }],
            vec![RankObservation { gamer: gid("a"), rank_a: true, split: Split::Validation }],
        )
        .unwrap();
        let index = ParameterIndex::for_dataset(&ds);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let pv = ParameterVector::new(params.clone()).unwrap();
            let (_, grad) = log_posterior(&pv, &ds, &priors()).unwrap();
            for m in 0..2 {
                let slot = index.effect_slot(1, m);
                assert_eq!(grad[slot].to_bits(), (-params[slot]).to_bits());
            }
        }
    }

    #[test]
    fn translation_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let shift = rng.random_range(-2.0..2.0);
            let gamers = vec![gid("a"), gid("b")];
            let mods = vec![mid("chat")];
            let base_logits: Vec<LogitObservation> = (0..6)
                .map(|t| LogitObservation {
                    gamer: if t % 2 == 0 { gid("a") } else { gid("b") },
                    modality: mid("chat"),
                    datapoint: t,
                    logit: rng.random_range(-2.0..2.0),
                })
                .collect();
            let shifted_logits: Vec<LogitObservation> = base_logits
                .iter()
                .map(|o| LogitObservation { logit: o.logit + shift, ..o.clone() })
                .collect();
            let ds = Dataset::new(gamers.clone(), mods.clone(), base_logits, vec![]).unwrap();
            let ds_shift = Dataset::new(gamers, mods, shifted_logits, vec![]).unwrap();
            let index = ParameterIndex::for_dataset(&ds);

            let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut params_shift = params.clone();
            params_shift[index.mu_slot(0)] += shift;

            let p0 = HyperPriors::default();
            let p1 = HyperPriors::new(p0.mu_loc + shift, p0.mu_scale, p0.sigma_scale, p0.tau_scale)
                .unwrap();
            let (v0, _) =
                log_posterior(&ParameterVector::new(params).unwrap(), &ds, &p0).unwrap();
            let (v1, _) =
                log_posterior(&ParameterVector::new(params_shift).unwrap(), &ds_shift, &p1)
                    .unwrap();
            assert!((v0 - v1).abs() < 1e-10, "{v0} vs {v1}");
        }
    }

    #[test]
    fn deterministic_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let ds = random_dataset(&mut rng, 4, 2);
        let index = ParameterIndex::for_dataset(&ds);
        let params: Vec<f64> = (0..index.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let pv = ParameterVector::new(params).unwrap();
        let a = log_posterior(&pv, &ds, &priors()).unwrap();
        let b = log_posterior(&pv, &ds, &priors()).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        for (x, y) in a.1.iter().zip(&b.1) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let ds = Dataset::new(vec![gid("a")], vec![mid("chat")], vec![], vec![]).unwrap();
        let short = ParameterVector::zeros(2);
        assert!(matches!(
            log_posterior(&short, &ds, &priors()),
            Err(ModelError::DimensionMismatch { expected: 4, got: 2 })
        ));
        // An overflowing log-scale drives exp(log_tau) to infinity.
        let mut grad = vec![0.0; 4];
        let res = log_posterior_with(
            &[0.0, 0.0, 0.0, 800.0],
            &ds,
            &priors(),
            Parameterization::NonCentered,
            &mut grad,
        );
        assert!(matches!(res, Err(ModelError::NonFiniteDensity { .. })));
    }
}
