//! Command-line pipeline: corpus ingestion, similarity network, coordinated
//! communities, propaganda scoring, coordination trends and the final report.

// `!(x >= 0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod pipeline;
pub mod plot;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, run_stage, Stage, StageError};
