//! File formats, pipeline stages and command line around `ista-core`.

pub mod checks;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod stages;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
