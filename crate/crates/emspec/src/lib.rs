//! File formats, configuration, stage orchestration, plots and the command
//! line for the `emspec-core` indicators.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod fixtures;
pub mod pipeline;
pub mod plot;
pub mod store;

pub use config::{Overrides, PipelineConfig};
pub use error::{AppError, ErrorKind, Result};
