//! Experiment harness: JSON configuration, the experiment catalog, CSV and
//! SVG output, and one-command figure bundles.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod reproduce;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiments::{SweepMetadata, SweepResult};
