//! Simulation-based calibration: draw truths from the prior, simulate data,
//! sample the posterior, and test the rank of each truth among the posterior
//! draws for uniformity.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::math::splitmix64;
use crate::model::{HyperPriors, ParameterIndex, Parameterization, PooledDensity};
use crate::sampler::{diagnose, sample_chains, LogDensityGradient, SamplerConfig, SamplerError};

use super::simulate::{simulate_observations, SimError, TruthConfig};

const RANK_DRAWS: usize = 127;
const HISTOGRAM_BINS: usize = 20;
const RHAT_EXCLUSION: f64 = 1.05;

#[derive(Debug, Error)]
pub enum SbcError {
    #[error("need at least 100 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("calibration needs at least 2 chains for the convergence screen")]
    TooFewChains,
    #[error("sampler budget must retain at least {needed} draws, got {got}")]
    BudgetTooSmall { needed: usize, got: usize },
    #[error("every replicate was excluded by the convergence screen")]
    AllExcluded,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Calibration run settings: the data shape to simulate and the priors the
/// truths are drawn from (the same priors the sampler then assumes).
#[derive(Debug, Clone)]
pub struct SbcConfig {
    pub n_gamers: usize,
    pub n_modalities: usize,
    pub plan: super::ObservationPlan,
    pub validation_fraction: f64,
    pub priors: HyperPriors,
    pub seed: u64,
}

/// Optional fault injected into the model density, used to verify that the
/// harness actually detects a broken sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientFault {
    #[default]
    None,
    /// Negate every gradient coordinate while leaving the density intact.
    SignFlip,
}

struct FaultyDensity<T> {
    inner: T,
    fault: GradientFault,
}

impl<T: LogDensityGradient> LogDensityGradient for FaultyDensity<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Option<f64> {
        let lp = self.inner.logp_grad(position, grad)?;
        if self.fault == GradientFault::SignFlip {
            for g in grad.iter_mut() {
                *g = -*g;
            }
        }
        Some(lp)
    }
}

/// Rank histogram and uniformity test for one monitored quantity.
#[derive(Debug, Clone, Serialize)]
pub struct QuantityCalibration {
    pub name: String,
    pub histogram: Vec<u64>,
    pub chi_square: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SbcResult {
    pub quantities: Vec<QuantityCalibration>,
    pub replicates_used: usize,
    pub replicates_excluded: usize,
}

impl SbcResult {
    pub fn min_p_value(&self) -> f64 {
        self.quantities.iter().map(|q| q.p_value).fold(f64::INFINITY, f64::min)
    }
}

fn rank_bin(rank: usize) -> usize {
    rank * HISTOGRAM_BINS / (RANK_DRAWS + 1)
}

/// Expected share of ranks per histogram bin: 128 possible ranks do not
/// divide evenly into 20 bins, so bins carry slightly different widths.
fn bin_widths() -> [f64; HISTOGRAM_BINS] {
    let mut widths = [0.0; HISTOGRAM_BINS];
    for rank in 0..=RANK_DRAWS {
        widths[rank_bin(rank)] += 1.0 / (RANK_DRAWS + 1) as f64;
    }
    widths
}

/// Runs simulation-based calibration with the standard (fault-free) model.
pub fn sbc(
    config: &SbcConfig,
    replicates: usize,
    budget: &SamplerConfig,
) -> Result<SbcResult, SbcError> {
    sbc_with(config, replicates, budget, GradientFault::None)
}

/// Calibration with an optional injected fault. Per replicate: truths drawn
/// from the prior, a dataset simulated, the sampler run at the given budget,
/// non-convergent replicates (any split R-hat above 1.05) excluded, and the
/// rank of each truth recorded among 127 evenly thinned posterior draws.
/// Ranks are aggregated into 20 bins and tested for uniformity per quantity
/// with a chi-square test.
pub fn sbc_with(
    config: &SbcConfig,
    replicates: usize,
    budget: &SamplerConfig,
    fault: GradientFault,
) -> Result<SbcResult, SbcError> {
    if replicates < 100 {
        return Err(SbcError::TooFewReplicates(replicates));
    }
    if budget.chains < 2 {
        return Err(SbcError::TooFewChains);
    }
    budget.validate()?;
    let retained_total = budget.retained_per_chain() * budget.chains;
    if retained_total < RANK_DRAWS {
        return Err(SbcError::BudgetTooSmall { needed: RANK_DRAWS, got: retained_total });
    }

    let m_count = config.n_modalities;
    // Monitored quantities: each modality's mean, scale, noise, plus the
    // first gamer's skill.
    let mut names = Vec::new();
    for m in 0..m_count {
        names.push(format!("mu[{m}]"));
    }
    for m in 0..m_count {
        names.push(format!("sigma[{m}]"));
    }
    for m in 0..m_count {
        names.push(format!("tau[{m}]"));
    }
    names.push("skill[0]".to_owned());
    let n_quantities = names.len();

    let mut histograms = vec![vec![0u64; HISTOGRAM_BINS]; n_quantities];
    let mut used = 0usize;
    let mut excluded = 0usize;

    let results: Vec<Option<Vec<usize>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..replicates)
            .map(|replicate| {
                scope.spawn(move || run_replicate(config, budget, fault, replicate))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("replicate thread panicked")).collect()
    });

    for ranks in results {
        match ranks {
            Some(ranks) => {
                used += 1;
                for (q, &rank) in ranks.iter().enumerate() {
                    histograms[q][rank_bin(rank)] += 1;
                }
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(SbcError::AllExcluded);
    }

    let widths = bin_widths();
    let chi = ChiSquared::new((HISTOGRAM_BINS - 1) as f64).expect("valid dof");
    let quantities = names
        .into_iter()
        .zip(histograms)
        .map(|(name, histogram)| {
            let mut stat = 0.0;
            for (bin, &count) in histogram.iter().enumerate() {
                let expected = used as f64 * widths[bin];
                let diff = count as f64 - expected;
                stat += diff * diff / expected;
            }
            QuantityCalibration {
                name,
                histogram,
                chi_square: stat,
                p_value: chi.sf(stat),
            }
        })
        .collect();

    Ok(SbcResult { quantities, replicates_used: used, replicates_excluded: excluded })
}

/// One replicate: returns the monitored-quantity ranks, or None when the
/// convergence screen rejects the run.
fn run_replicate(
    config: &SbcConfig,
    budget: &SamplerConfig,
    fault: GradientFault,
    replicate: usize,
) -> Option<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0x5bc0_0000 + replicate as u64);
    let m_count = config.n_modalities;
    let priors = config.priors;

    // Truths from the prior.
    let mu: Vec<f64> = (0..m_count)
        .map(|_| priors.mu_loc + priors.mu_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let sigma: Vec<f64> = (0..m_count)
        .map(|_| (priors.sigma_scale * rng.sample::<f64, _>(StandardNormal)).abs())
        .collect();
    let tau: Vec<f64> = (0..m_count)
        .map(|_| (priors.tau_scale * rng.sample::<f64, _>(StandardNormal)).abs())
        .collect();
    let effects: Vec<Vec<f64>> = (0..config.n_gamers)
        .map(|_| {
            (0..m_count)
                .map(|m| mu[m] + sigma[m] * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let truth_config = TruthConfig {
        n_gamers: config.n_gamers,
        n_modalities: m_count,
        plan: config.plan.clone(),
        validation_fraction: config.validation_fraction,
        modality_mean: mu.clone(),
        modality_scale: sigma.iter().map(|s| s.max(1e-6)).collect(),
        noise_scale: tau.iter().map(|t| t.max(1e-6)).collect(),
        seed: 0, // unused by simulate_observations; rng is passed in
    };
    let dataset = simulate_observations(&mut rng, &truth_config, &effects).ok()?;

    let density = PooledDensity::new(&dataset, priors);
    let target = FaultyDensity { inner: density, fault };
    let run_config = SamplerConfig {
        seed: splitmix64(config.seed ^ (replicate as u64 + 1)),
        ..*budget
    };
    let index = ParameterIndex::for_dataset_with(&dataset, Parameterization::NonCentered);
    let names = index.names(&dataset);
    let draws = sample_chains(&target, &run_config, names).ok()?;

    // Convergence screen.
    let diagnostics = diagnose(&draws).ok()?;
    if diagnostics.parameters.iter().any(|p| p.rhat.is_finite() && p.rhat > RHAT_EXCLUSION) {
        return None;
    }

    // Monitored posterior draws, thinned evenly to RANK_DRAWS points.
    let total = draws.total_draws();
    let thin_indices: Vec<usize> =
        (0..RANK_DRAWS).map(|j| j * total / RANK_DRAWS).collect();
    let mut ranks = Vec::with_capacity(3 * m_count + 1);

    let mut rank_of = |truth: f64, series: &dyn Fn(usize) -> f64| {
        let mut below = 0usize;
        for &idx in &thin_indices {
            if series(idx) < truth {
                below += 1;
            }
        }
        ranks.push(below);
    };

    let flat = |param: usize| -> Vec<f64> { draws.pooled_column(param) };
    for m in 0..m_count {
        let col = flat(index.mu_slot(m));
        rank_of(mu[m], &|i| col[i]);
    }
    for m in 0..m_count {
        let col = flat(index.log_sigma_slot(m));
        rank_of(sigma[m], &|i| col[i].exp());
    }
    for m in 0..m_count {
        let col = flat(index.log_tau_slot(m));
        rank_of(tau[m], &|i| col[i].exp());
    }
    let skill_truth: f64 = effects[0].iter().sum();
    let skill_draws = crate::posterior::skill_draws_by_index(&draws, &index, 0);
    rank_of(skill_truth, &|i| skill_draws[i]);

    Some(ranks)
}
