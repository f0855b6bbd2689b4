//! Experiment runner for the `finsec` library: JSON configs in, CSV and JSON
//! artifacts out.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{norms, run, weights_check, Options};
pub use error::CliError;
