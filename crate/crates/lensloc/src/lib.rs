//! Experiment harness, file formats and command-line plumbing around
//! `lensloc-core`.

pub mod config;
pub mod experiments;
pub mod io;
pub mod sim;

pub use config::{Config, ConfigError};
pub use experiments::{run_sweep, run_sweep_with, ExperimentConfig, ExperimentId, ResultTable};
