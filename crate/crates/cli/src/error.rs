use std::io;
use std::path::{Path, PathBuf};

use stemfit::cloud::ply::PlyError;
use stemfit::fitting::FitError;
use stemfit::metrics::{ImageError, MetricsError};
use stemfit::synth::SynthError;
use thiserror::Error;

/// Pipeline failure, tagged with the stage that produced it.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("simulate: {0}")]
    Synth(#[from] SynthError),
    #[error("io: {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("load: {}: {source}", path.display())]
    Ply { path: PathBuf, source: PlyError },
    #[error("images: {0}")]
    Image(#[from] ImageError),
    #[error("fit: {0}")]
    Fit(#[from] FitError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("fit: no slice with a circle between {lo} and {hi} m along the axis")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("plot: no points to draw")]
    EmptyPlot,
}

impl HarnessError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 2 configuration, 3 I/O or unreadable input,
    /// 4 fit or metrics.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Synth(_) => 2,
            HarnessError::Io { .. } | HarnessError::Ply { .. } => 3,
            HarnessError::Image(ImageError::Decode(_) | ImageError::Invalid(_)) => 3,
            HarnessError::Image(_) | HarnessError::Fit(_) | HarnessError::Metrics(_) | HarnessError::EmptyBand { .. }
            | HarnessError::EmptyPlot => 4,
        }
    }
}
