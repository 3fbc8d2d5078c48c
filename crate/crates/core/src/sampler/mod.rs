//! From-scratch Hamiltonian Monte Carlo with No-U-Turn dynamic trajectories,
//! Stan-style warmup adaptation, multi-chain execution, and convergence
//! diagnostics.
//!
//! Randomness: every chain owns a ChaCha8 counter-based generator keyed by
//! the run seed, with the chain index as the stream number. Streams are
//! independent and the per-chain draw sequence does not depend on thread
//! scheduling, so runs are bit-reproducible for a fixed seed and chain count.

mod adapt;
mod diagnostics;
mod export;
mod leapfrog;
mod nuts;
mod run;
mod target;

pub use adapt::{adapt_warmup, find_reasonable_step, DualAveraging};
pub use diagnostics::{diagnose, ess, rhat, Diagnostics, ParamDiagnostic};
pub use export::{diagnostics_to_json, write_draws_csv};
pub use leapfrog::leapfrog;
pub use nuts::{nuts_transition, TransitionStats};
pub use run::{run_chains, run_chains_with, sample_chains, ChainRun, ChainState, MultiChainDraws};
pub use target::{DiagonalGaussian, LogDensityGradient};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {chain}: no finite starting point found in {attempts} initialization attempts")]
    InitializationFailed { chain: usize, attempts: usize },
    #[error("log density is not finite at the current chain position")]
    NonFiniteStart,
    #[error("chain {chain}: every warmup transition diverged; the model or step size is unusable")]
    AllDivergentWarmup { chain: usize },
    #[error("diagnostics need at least 2 chains with 4 draws each, got {chains} chains of {draws}")]
    NotEnoughDraws { chains: usize, draws: usize },
    #[error("parameter index {index} out of range for dimension {dim}")]
    ParameterOutOfRange { index: usize, dim: usize },
}

/// Multi-chain sampler settings. `iterations` counts all transitions per
/// chain including warmup; only post-warmup draws are retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_treedepth: u32,
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 20_000,
            warmup: 10_000,
            seed: 0,
            target_accept: 0.8,
            max_treedepth: 10,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0 {
            return Err(SamplerError::InvalidConfig("chains must be >= 1".into()));
        }
        if self.warmup < 20 {
            return Err(SamplerError::InvalidConfig(
                "warmup must be >= 20 for step-size and mass adaptation".into(),
            ));
        }
        if self.iterations <= self.warmup {
            return Err(SamplerError::InvalidConfig("iterations must exceed warmup".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::InvalidConfig("target_accept must be in (0, 1)".into()));
        }
        if !(self.init_radius > 0.0) || !self.init_radius.is_finite() {
            return Err(SamplerError::InvalidConfig("init_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        self.iterations - self.warmup
    }
}
