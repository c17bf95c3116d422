//! Experiment runner for the monitored Rabi model: configuration files,
//! checkpointed Fisher runs, steady-state scans, detector demos, damping
//! fits and finite-size collapse, with CSV tables and SVG figures.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
