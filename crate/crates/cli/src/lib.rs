//! Experiment runner behind the `deligan` binary: config loading, the
//! subcommands and SVG plotting.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::CliError;
