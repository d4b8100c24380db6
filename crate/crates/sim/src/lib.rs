//! Experiment harness around `raqsim-core`: synthetic multi-view data,
//! end-to-end episodes, sweeps, CSV reporting and on-disk formats.

pub mod config;
pub mod dataset;
pub mod episode;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod pgm;
mod streams;

pub use config::{ExperimentConfig, Scheme};
pub use error::SimError;
pub use experiment::{run_experiment, ResultRow};
