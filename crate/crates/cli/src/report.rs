//! Run reports.
//!
//! JSON key set (stable): `tool`, `version`, `config`, `seeds`, `crop`,
//! `cloud`, `fit`, `diameter`, `radial`, `render`, `wall_time_s`. CSV rows
//! use [`CSV_COLUMNS`] in that order; PSNR of identical images is written
//! as `inf` in both formats.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stemfit::cloud::{CloudStats, CropReport};
use stemfit::fitting::EllipseModel;
use stemfit::metrics::{DiameterReport, Psnr, RadialStats, RenderQualityReport};

use crate::config::PipelineConfig;
use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub master: u64,
    pub surface: u64,
    pub scan: u64,
    pub perturbation: u64,
    pub fit: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub seeds: StageSeeds,
    pub crop: CropReport,
    /// Statistics of the cropped cloud.
    pub cloud: CloudStats,
    pub fit: FitSummary,
    pub diameter: DiameterReport,
    /// Radial residuals of every cropped point about the fitted cylinder.
    pub radial: RadialStats,
    pub render: Option<RenderQualityReport>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    /// Reported diameter: twice the median circle radius over the slices in
    /// the diameter band, or the cylinder diameter without a band.
    pub diameter: f64,
    pub radius: f64,
    pub axis_point: [f64; 3],
    pub axis_dir: [f64; 3],
    pub z_extent: [f64; 2],
    pub inliers: usize,
    pub rms_residual: f64,
    pub iterations: usize,
    /// Median over slices of the equal-area ellipse diameter and axes.
    pub ellipse: Option<EllipseSummary>,
    pub slices: Vec<SliceSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSummary {
    pub diameter: f64,
    pub major: f64,
    pub minor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub h_min: f64,
    pub h_max: f64,
    pub points: usize,
    pub in_band: bool,
    pub circle: Option<CircleSummary>,
    pub ellipse: Option<EllipseModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSummary {
    pub center: [f64; 2],
    pub radius: f64,
    pub inliers: usize,
    pub rms_residual: f64,
}

pub const CSV_COLUMNS: [&str; 22] = [
    "tool",
    "version",
    "seed",
    "regime",
    "points_before",
    "points_after",
    "percent_reduction",
    "diameter",
    "ground_truth",
    "abs_error",
    "pct_error",
    "ellipse_diameter",
    "radius",
    "inliers",
    "rms_residual",
    "radial_count",
    "radial_mean",
    "radial_std",
    "radial_rms",
    "psnr",
    "ssim",
    "wall_time_s",
];

impl RunReport {
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.tool.clone(),
            self.version.clone(),
            self.seeds.master.to_string(),
            self.config.source.regime().to_string(),
            self.crop.before.to_string(),
            self.crop.after.to_string(),
            self.crop.percent_reduction.to_string(),
            self.fit.diameter.to_string(),
            self.diameter.ground_truth.to_string(),
            self.diameter.abs_error.to_string(),
            self.diameter.pct_error.to_string(),
            opt(self.fit.ellipse.map(|e| e.diameter)),
            self.fit.radius.to_string(),
            self.fit.inliers.to_string(),
            self.fit.rms_residual.to_string(),
            self.radial.count.to_string(),
            self.radial.mean.to_string(),
            self.radial.std.to_string(),
            self.radial.rms.to_string(),
            self.render
                .map(|r| match r.psnr {
                    Psnr::Finite(v) => v.to_string(),
                    Psnr::Infinite => "inf".to_string(),
                })
                .unwrap_or_default(),
            opt(self.render.map(|r| r.ssim)),
            self.wall_time_s.to_string(),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

/// JSON overwrites `path`; CSV appends one row, writing the header only when
/// the file is new or empty.
pub fn write_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let io_err = |e| HarnessError::io(path, e);
    match format {
        ReportFormat::Json => {
            let mut text = report.to_json();
            text.push('\n');
            std::fs::write(path, text).map_err(io_err)
        }
        ReportFormat::Csv => {
            let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
            let fresh = file.metadata().map_err(io_err)?.len() == 0;
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                if fresh {
                    w.write_record(CSV_COLUMNS).map_err(csv_err(path))?;
                }
                w.write_record(report.csv_row()).map_err(csv_err(path))?;
                w.flush().map_err(io_err)?;
            }
            file.write_all(&buf).map_err(io_err)
        }
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, std::io::Error::other(e))
}
