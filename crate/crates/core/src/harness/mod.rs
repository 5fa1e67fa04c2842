//! Configuration, experiment dispatch, and persistent outputs.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use run::{run, sweep, RunRecord, Verdict};
