//! Ground-truth machinery: a forward simulator of the generative model, a
//! deterministic small-instance posterior oracle, and a simulation-based
//! calibration harness.

mod oracle;
mod sbc;
mod simulate;

pub use oracle::{grid_posterior_oracle, FixedHyperModel, OracleError};
pub use sbc::{sbc, sbc_with, GradientFault, SbcConfig, SbcError, SbcResult};
pub use simulate::{simulate, ObservationPlan, SimError, TruthConfig, TruthRecord};
