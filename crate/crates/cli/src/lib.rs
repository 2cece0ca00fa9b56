//! Experiment driver: configuration, datasets, the seven imaging systems,
//! reports and diagnostic exports.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::{ExperimentConfig, Lattice, SystemVariant};
pub use error::{Error, Result};
