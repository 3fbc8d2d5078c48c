//! The hierarchical pooling model: data structures, the unconstrained
//! parameterization, and the joint log-posterior with its analytic gradient.

mod dataset;
mod density;
mod params;

pub use dataset::{
    Dataset, GamerId, LogitObservation, ModalityId, PairStats, RankObservation, Split,
};
pub use density::{log_posterior, log_posterior_with, PooledDensity};
pub use params::{
    constrain, skill_of, ConstrainedParams, HyperPriors, ParameterIndex, ParameterVector,
    Parameterization,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("identifier must be a non-empty token without whitespace, commas or control characters: {0:?}")]
    InvalidId(String),
    #[error("duplicate gamer id {0:?}")]
    DuplicateGamer(String),
    #[error("duplicate modality id {0:?}")]
    DuplicateModality(String),
    #[error("unknown gamer id {0:?}")]
    UnknownGamer(String),
    #[error("unknown modality id {0:?}")]
    UnknownModality(String),
    #[error("duplicate logit observation for (gamer={gamer:?}, modality={modality:?}, datapoint={datapoint})")]
    DuplicateLogit { gamer: String, modality: String, datapoint: u64 },
    #[error("non-finite logit for (gamer={gamer:?}, modality={modality:?}, datapoint={datapoint})")]
    NonFiniteLogit { gamer: String, modality: String, datapoint: u64 },
    #[error("more than one rank observation for gamer {0:?}")]
    DuplicateRank(String),
    #[error("dataset needs at least one gamer")]
    NoGamers,
    #[error("dataset needs at least one modality")]
    NoModalities,
    #[error("hyper-prior scales must be strictly positive")]
    NonPositiveScale,
    #[error("parameter vector has length {got}, model dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector contains a non-finite entry at position {position}")]
    NonFiniteParameter { position: usize },
    #[error("log-posterior evaluation produced a non-finite intermediate at parameter location {location:?}")]
    NonFiniteDensity { location: Vec<f64> },
}
