//! Experiment runner for the `lorenz-shadow` harness: config parsing, the
//! model property suite, and the `model-check`, `build-pseudo` and `falsify`
//! commands with their file outputs.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run_build_pseudo, run_falsify, run_model_check, FalsifyRun, Outcome};
pub use config::{ExperimentConfig, GammaSource, Overrides};
pub use error::CliError;
