//! Pooling of noisy per-modality classifier evidence about competitive gamers
//! into posterior distributions of intrinsic skill.
//!
//! The centerpiece is a hierarchical random-effects model: each gamer `i` has
//! a latent effect per evidence modality `m`, drawn from a modality-level
//! normal with mean `mu[m]` and scale `sigma[m]`. Upstream classifiers emit
//! log-odds observations around those effects with noise scale `tau[m]`, and
//! held-out binary rank labels are tied to the summed effects through a
//! logistic link. Inference runs on a from-scratch multinomial No-U-Turn
//! sampler with dual-averaging step-size adaptation and a diagonal mass
//! matrix.
//!
//! The crate also carries the first-stage machinery that produces the
//! evidence (Platt calibration, score aggregation, decile quantization, chat
//! featurization, batch-hard triplet training with a logistic scorer), the
//! evaluation battery (rank AUC, F1 threshold selection, Kendall tau-b,
//! Pearson), and a simulation kit with deterministic posterior oracles and a
//! simulation-based calibration harness.

pub mod math;
pub mod metrics;
pub mod model;
pub mod posterior;
pub mod sampler;
pub mod simkit;
pub mod upstream;

pub use model::{
    constrain, log_posterior, skill_of, ConstrainedParams, Dataset, GamerId, HyperPriors,
    LogitObservation, ModalityId, ModelError, ParameterIndex, ParameterVector, Parameterization,
    RankObservation, Split,
};
pub use sampler::{
    adapt_warmup, ess, leapfrog, nuts_transition, rhat, run_chains, run_chains_with,
    sample_chains, ChainRun, ChainState, Diagnostics, LogDensityGradient, MultiChainDraws,
    SamplerConfig, SamplerError, TransitionStats,
};
