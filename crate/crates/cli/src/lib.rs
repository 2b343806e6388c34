//! Experiment runner for multi-scale Forward-Forward training: TOML experiment
//! files, per-epoch CSV metrics, binary checkpoints and ablation sweeps.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod metrics;
pub mod run;

pub use error::{CliError, Result};
