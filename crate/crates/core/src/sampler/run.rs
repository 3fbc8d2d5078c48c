//! Multi-chain execution and the retained-draw container.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Dataset, HyperPriors, ParameterIndex, Parameterization, PooledDensity};

use super::adapt::{adapt_warmup, find_reasonable_step};
use super::nuts::nuts_transition;
use super::{LogDensityGradient, SamplerConfig, SamplerError};

const INIT_ATTEMPTS: usize = 100;

/// Mutable state of one chain: current position, tuned step size, diagonal
/// inverse mass matrix, and the chain's own deterministic generator.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub step_size: f64,
    pub inverse_mass_diag: Vec<f64>,
    pub rng: ChaCha8Rng,
}

/// Post-warmup output of a single chain. Draws are stored row-major:
/// `draws[d * dim + p]` is parameter `p` of draw `d`.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub draws: Vec<f64>,
    pub n_draws: usize,
    pub divergences: u64,
    pub tree_depths: Vec<u32>,
    pub accept_stats: Vec<f64>,
    pub step_size: f64,
}

/// Post-warmup draws from every chain plus per-chain sampler statistics.
#[derive(Debug, Clone)]
pub struct MultiChainDraws {
    pub dim: usize,
    pub param_names: Vec<String>,
    pub chains: Vec<ChainRun>,
}

impl MultiChainDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.n_draws)
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.n_draws).sum()
    }

    pub fn total_divergences(&self) -> u64 {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    pub fn value(&self, chain: usize, draw: usize, param: usize) -> f64 {
        self.chains[chain].draws[draw * self.dim + param]
    }

    /// One parameter's draws within one chain, as a contiguous vector.
    pub fn chain_column(&self, chain: usize, param: usize) -> Vec<f64> {
        let run = &self.chains[chain];
        (0..run.n_draws).map(|d| run.draws[d * self.dim + param]).collect()
    }

    /// One parameter's draws concatenated across chains, chain-major.
    pub fn pooled_column(&self, param: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_draws());
        for chain in 0..self.n_chains() {
            let run = &self.chains[chain];
            out.extend((0..run.n_draws).map(|d| run.draws[d * self.dim + param]));
        }
        out
    }
}

fn run_single_chain<T: LogDensityGradient + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    chain_idx: usize,
) -> Result<ChainRun, SamplerError> {
    let dim = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain_idx as u64);

    let mut grad = vec![0.0; dim];
    let radius = config.init_radius;
    let mut position = None;
    for _ in 0..INIT_ATTEMPTS {
        let candidate: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        if target.logp_grad(&candidate, &mut grad).is_some() {
            position = Some(candidate);
            break;
        }
    }
    let position = position
        .ok_or(SamplerError::InitializationFailed { chain: chain_idx, attempts: INIT_ATTEMPTS })?;

    let inverse_mass_diag = vec![1.0; dim];
    let step_size = find_reasonable_step(target, &position, &inverse_mass_diag, &mut rng)?;
    let mut state = ChainState { position, step_size, inverse_mass_diag, rng };

    adapt_warmup(&mut state, target, config).map_err(|e| match e {
        SamplerError::AllDivergentWarmup { .. } => {
            SamplerError::AllDivergentWarmup { chain: chain_idx }
        }
        other => other,
    })?;

    let retained = config.retained_per_chain();
    let mut draws = Vec::with_capacity(retained * dim);
    let mut tree_depths = Vec::with_capacity(retained);
    let mut accept_stats = Vec::with_capacity(retained);
    let mut divergences = 0u64;
    for _ in 0..retained {
        let stats = nuts_transition(&mut state, target, config.max_treedepth)?;
        if stats.divergent {
            divergences += 1;
        }
        tree_depths.push(stats.depth);
        accept_stats.push(stats.accept_stat);
        draws.extend_from_slice(&state.position);
    }

    Ok(ChainRun {
        draws,
        n_draws: retained,
        divergences,
        tree_depths,
        accept_stats,
        step_size: state.step_size,
    })
}

/// Runs `config.chains` independent chains against an arbitrary target.
/// Chains execute on their own threads with no shared mutable state; each is
/// seeded from (seed, chain index), so results are bit-reproducible for a
/// fixed seed and chain count regardless of scheduling.
pub fn sample_chains<T: LogDensityGradient + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    param_names: Vec<String>,
) -> Result<MultiChainDraws, SamplerError> {
    config.validate()?;
    let dim = target.dim();
    if param_names.len() != dim {
        return Err(SamplerError::InvalidConfig(format!(
            "{} parameter names for dimension {dim}",
            param_names.len()
        )));
    }

    let results: Vec<Result<ChainRun, SamplerError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|k| scope.spawn(move || run_single_chain(target, config, k)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });

    let mut chains = Vec::with_capacity(config.chains);
    for result in results {
        chains.push(result?);
    }
    Ok(MultiChainDraws { dim, param_names, chains })
}

/// Runs the pooling model's posterior with the default non-centered
/// parameterization.
pub fn run_chains(
    dataset: &Dataset,
    priors: &HyperPriors,
    config: &SamplerConfig,
) -> Result<MultiChainDraws, SamplerError> {
    run_chains_with(dataset, priors, config, Parameterization::NonCentered)
}

/// Runs the pooling model's posterior in the requested parameterization.
pub fn run_chains_with(
    dataset: &Dataset,
    priors: &HyperPriors,
    config: &SamplerConfig,
    parameterization: Parameterization,
) -> Result<MultiChainDraws, SamplerError> {
    let density = PooledDensity::with_parameterization(dataset, *priors, parameterization);
    let names = ParameterIndex::for_dataset_with(dataset, parameterization).names(dataset);
    sample_chains(&density, config, names)
}

#[cfg(test)]
mod tests {
    use super::super::target::DiagonalGaussian;
    use super::*;

    fn small_config(chains: usize, iterations: usize, warmup: usize, seed: u64) -> SamplerConfig {
        SamplerConfig { chains, iterations, warmup, seed, ..SamplerConfig::default() }
    }

    #[test]
    fn retained_draw_counts() {
        let target = DiagonalGaussian::standard(1);
        let names = vec!["x".to_string()];
        let draws =
            sample_chains(&target, &small_config(2, 100, 50, 5), names.clone()).unwrap();
        assert_eq!(draws.total_draws(), 100);
        assert_eq!(draws.draws_per_chain(), 50);

        // Paper-scale schedule: 4 chains, 20000 iterations, 10000 warmup
        // retain 40000 draws.
        let draws = sample_chains(&target, &small_config(4, 20_000, 10_000, 5), names).unwrap();
        assert_eq!(draws.total_draws(), 40_000);
    }

    #[test]
    fn fixed_seed_reproduces_bit_identical_draws() {
        let target = DiagonalGaussian { mean: vec![1.0, -2.0], sd: vec![0.5, 3.0] };
        let names = vec!["a".to_string(), "b".to_string()];
        let config = small_config(3, 200, 100, 1234);
        let first = sample_chains(&target, &config, names.clone()).unwrap();
        let second = sample_chains(&target, &config, names).unwrap();
        for (c1, c2) in first.chains.iter().zip(&second.chains) {
            assert_eq!(c1.draws.len(), c2.draws.len());
            for (a, b) in c1.draws.iter().zip(&c2.draws) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert_eq!(c1.step_size.to_bits(), c2.step_size.to_bits());
        }
    }

    #[test]
    fn accept_statistic_tracks_target() {
        let target = DiagonalGaussian::standard(4);
        let draws =
            sample_chains(&target, &small_config(2, 1500, 750, 21), (0..4).map(|i| format!("x{i}")).collect())
                .unwrap();
        for chain in &draws.chains {
            let mean_accept =
                chain.accept_stats.iter().sum::<f64>() / chain.accept_stats.len() as f64;
            assert!(
                (0.7..=0.9).contains(&mean_accept),
                "mean accept statistic {mean_accept} outside [0.7, 0.9]"
            );
        }
    }

    #[test]
    fn impossible_target_fails_initialization() {
        struct Nowhere;
        impl LogDensityGradient for Nowhere {
            fn dim(&self) -> usize {
                1
            }
            fn logp_grad(&self, _position: &[f64], _grad: &mut [f64]) -> Option<f64> {
                None
            }
        }
        let err = sample_chains(&Nowhere, &small_config(1, 100, 50, 0), vec!["x".into()]);
        assert!(matches!(err, Err(SamplerError::InitializationFailed { .. })));
    }
}
