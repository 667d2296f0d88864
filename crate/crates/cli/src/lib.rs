//! Experiment runner for the holderflow library: configuration, grids,
//! reproducible CSV/JSON outputs and run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod output;

pub use commands::{run_experiment, Command};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
