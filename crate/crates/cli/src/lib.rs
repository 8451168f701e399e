//! Experiment runner behind the `wagmf` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiment::{run, Report};
