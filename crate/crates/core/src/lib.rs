//! Numerical laboratory for viscous perturbations of the 2D plane Poiseuille
//! flow (y^2, 0) on T x R: per-mode linear semigroup with a time-weighted
//! energy functional, enhanced-dissipation rate extraction, semigroup
//! integral estimates, and a nonlinear pseudo-spectral solver with
//! transition-threshold sweeps.

pub mod decay;
pub mod error;
pub mod expm;
pub mod field;
pub mod grid;
pub mod harness;
pub mod hypocoercivity;
pub mod nonlinear;
pub mod norms;
pub mod operators;
pub mod semigroup;
pub mod tridiag;

#[cfg(test)]
pub(crate) mod testutil;

pub use decay::{DecayFit, ScalingResult};
pub use error::{Error, Result};
pub use field::{ModeField, PerturbationState};
pub use grid::Grid;
pub use harness::{ExperimentConfig, RunRecord};
pub use hypocoercivity::{FunctionalSample, HypoConstants};
pub use nonlinear::{NonlinearState, ThresholdRecord};
pub use semigroup::{ModeOperator, StepperConfig};
