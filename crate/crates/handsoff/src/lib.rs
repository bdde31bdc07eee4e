//! File handling and the command line around `handsoff-core`: streaming
//! CSV IO, definition and job files, the record pipeline, file sorting and
//! subtotal reports.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod sortio;

pub use config::{load_definition, load_job, Definition, Job};
pub use error::{Error, Result};
pub use pipeline::{compare_files, run_pipeline, PipelineSpec, RunStats};
pub use sortio::sort_file;
