//! Experiment runner: TOML-configured grids of optimizer runs written as
//! CSV traces plus an aggregate summary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod summary;
pub mod trace;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, RunOptions, RunReport};
