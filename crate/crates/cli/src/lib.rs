//! Experiment runner: configuration, sweeps, persistence, checking and plots.

pub mod config;
pub mod fit;
pub mod plot;
pub mod results;
pub mod run;

pub use config::{ExperimentConfig, Mode};
pub use run::{execute, run, standalone_checks, Report};
