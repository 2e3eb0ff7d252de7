//! Config-driven experiment runner for dressed-state gate simulations.

pub mod config;
pub mod plot;
pub mod presets;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, Manifest, ResultRow, RunOutput};
