//! Command-line harness for the stemfit pipeline: configuration, the
//! generate → crop → fit → evaluate run, reports and SVG overlays.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use config::{PipelineConfig, DEFAULT_CONFIG};
pub use error::HarnessError;
pub use pipeline::{run_detailed, run_pipeline, stage_seeds};
pub use report::{write_report, ReportFormat, RunReport};
