use std::path::{Path, PathBuf};
use std::time::Instant;

use stemfit::cloud::ply::{read_ply, write_ply, PlyFormat};
use stemfit::cloud::{cloud_stats, crop_aabb, CropReport};
use stemfit::fitting::{fit_cylinder_slices, model_diameter, Model, MultisliceFit, SliceFit};
use stemfit::metrics::{diameter_error, load_image, radial_residual_stats, RenderQualityReport};
use stemfit::seed::derive_seed;
use stemfit::synth::{
    ring_trajectory, sample_cylinder_arc, simulate_multi_scan, ArcRange, PosePerturbation,
};
use stemfit::PointCloud;

use crate::config::{PipelineConfig, Source};
use crate::error::HarnessError;
use crate::report::{
    write_report, CircleSummary, EllipseSummary, FitSummary, ReportFormat, RunReport, SliceSummary, StageSeeds,
};
use crate::svg::{render_overlay_svg, Overlay};

pub const TOOL: &str = "stemfit";

/// Per-stage seeds, split from the master seed by stage name.
pub fn stage_seeds(master: u64) -> StageSeeds {
    StageSeeds {
        master,
        surface: derive_seed(master, "surface"),
        scan: derive_seed(master, "scan"),
        perturbation: derive_seed(master, "perturbation"),
        fit: derive_seed(master, "fit"),
    }
}

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RunReport,
    pub cloud: PointCloud,
    pub cropped: PointCloud,
    pub fit: MultisliceFit,
}

/// Produces the input cloud of the configured source.
pub fn generate(cfg: &PipelineConfig) -> Result<PointCloud, HarnessError> {
    let seeds = stage_seeds(cfg.seed);
    match &cfg.source {
        Source::Surface { n_points, radial_noise_sigma, arc_start_deg, arc_span_deg } => Ok(sample_cylinder_arc(
            &cfg.cylinder(),
            *n_points,
            *radial_noise_sigma,
            ArcRange::from_degrees(*arc_start_deg, *arc_span_deg),
            seeds.surface,
        )?),
        Source::MultiScan { n_poses, trajectory_radius, sensor_height, translation_sigma, rotation_sigma, scan } => {
            let base = cfg.scene.base_center;
            let poses = ring_trajectory([base[0], base[1]], *trajectory_radius, *sensor_height, *n_poses);
            let perturb = PosePerturbation { translation_sigma: *translation_sigma, rotation_sigma: *rotation_sigma };
            Ok(simulate_multi_scan(&cfg.scene()?, &poses, &scan.with_seed(seeds.scan), &perturb, seeds.perturbation)?)
        }
        Source::External { path } => load_cloud(path),
    }
}

pub fn load_cloud(path: &Path) -> Result<PointCloud, HarnessError> {
    read_ply(path).map_err(|source| HarnessError::Ply { path: path.to_path_buf(), source })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn in_band(slice: &SliceFit, band: Option<[f64; 2]>) -> bool {
    band.is_none_or(|[lo, hi]| {
        let mid = 0.5 * (slice.h_min + slice.h_max);
        lo <= mid && mid <= hi
    })
}

fn summarize(fit: &MultisliceFit, band: Option<[f64; 2]>) -> Result<FitSummary, HarnessError> {
    let m = &fit.fit.model;
    let selected: Vec<&SliceFit> = fit.slices.iter().filter(|s| in_band(s, band)).collect();
    let diameter = match band {
        None => 2.0 * m.radius,
        Some([lo, hi]) => {
            let radii = selected.iter().filter_map(|s| s.circle.as_ref().map(|c| c.model.radius)).collect();
            2.0 * median(radii).ok_or(HarnessError::EmptyBand { lo, hi })?
        }
    };
    let ellipses: Vec<_> = selected
        .iter()
        .filter_map(|s| s.ellipse.map(|e| model_diameter(&Model::Ellipse(e))))
        .collect();
    let ellipse = median(ellipses.iter().map(|d| d.diameter).collect()).map(|diameter| EllipseSummary {
        diameter,
        major: median(ellipses.iter().filter_map(|d| d.major).collect()).unwrap_or(diameter),
        minor: median(ellipses.iter().filter_map(|d| d.minor).collect()).unwrap_or(diameter),
    });
    let slices = fit
        .slices
        .iter()
        .map(|s| SliceSummary {
            h_min: s.h_min,
            h_max: s.h_max,
            points: s.point_count,
            in_band: band.is_some() && in_band(s, band),
            circle: s.circle.as_ref().map(|c| CircleSummary {
                center: [c.model.center.x, c.model.center.y],
                radius: c.model.radius,
                inliers: c.inlier_indices.len(),
                rms_residual: c.rms_residual,
            }),
            ellipse: s.ellipse,
        })
        .collect();
    Ok(FitSummary {
        diameter,
        radius: m.radius,
        axis_point: m.axis_point.coords.into(),
        axis_dir: m.axis_dir.into(),
        z_extent: [m.z_extent.0, m.z_extent.1],
        inliers: fit.fit.inlier_indices.len(),
        rms_residual: fit.fit.rms_residual,
        iterations: fit.fit.iterations_used,
        ellipse,
        slices,
    })
}

/// Fits and evaluates an already generated cloud.
pub fn evaluate(cfg: &PipelineConfig, cloud: PointCloud, started: Instant) -> Result<PipelineRun, HarnessError> {
    let seeds = stage_seeds(cfg.seed);
    let cropped = crop_aabb(&cloud, &cfg.crop_box()?);
    let crop = CropReport::new(cloud.len(), cropped.len());
    log::info!("{crop}");

    let fit = fit_cylinder_slices(&cropped, &cfg.fit.ransac(seeds.fit), cfg.fit.n_slices)?;
    let summary = summarize(&fit, cfg.fit.diameter_band)?;
    let diameter = diameter_error(summary.diameter, cfg.ground_truth_diameter())?;
    let radial = radial_residual_stats(&cropped, &fit.fit.model)?;
    let render = match (&cfg.metrics.reference_image, &cfg.metrics.test_image) {
        (Some(r), Some(t)) => Some(RenderQualityReport::compute(&load_image(r)?, &load_image(t)?)?),
        _ => None,
    };

    let report = RunReport {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        seeds,
        crop,
        cloud: cloud_stats(&cropped),
        fit: summary,
        diameter,
        radial,
        render,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(PipelineRun { report, cloud, cropped, fit })
}

/// Generate or load, crop, fit and evaluate; writes nothing.
pub fn run_detailed(cfg: &PipelineConfig) -> Result<PipelineRun, HarnessError> {
    let started = Instant::now();
    cfg.validate()?;
    let cloud = generate(cfg)?;
    evaluate(cfg, cloud, started)
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, HarnessError> {
    run_detailed(cfg).map(|r| r.report)
}

/// Slice shown in overlays: the in-band slice nearest the band centre, or
/// the middle slice.
pub fn overlay_slice(fit: &MultisliceFit, band: Option<[f64; 2]>) -> usize {
    match band {
        Some([lo, hi]) => {
            let target = 0.5 * (lo + hi);
            (0..fit.slices.len())
                .min_by(|&a, &b| {
                    let d = |k: usize| (0.5 * (fit.slices[k].h_min + fit.slices[k].h_max) - target).abs();
                    d(a).total_cmp(&d(b))
                })
                .unwrap_or(0)
        }
        None => fit.slices.len() / 2,
    }
}

pub fn write_overlay(fit: &MultisliceFit, k: usize, path: &Path) -> Result<(), HarnessError> {
    let slice = fit.slices.get(k).ok_or_else(|| {
        HarnessError::Config(format!("slice {k} out of range (0..{})", fit.slices.len()))
    })?;
    let mut models = Vec::new();
    if let Some(c) = &slice.circle {
        models.push(Overlay::Circle(c.model));
    }
    if let Some(e) = slice.ellipse {
        models.push(Overlay::Ellipse(e));
    }
    let title = format!("slice {k}: h {:.2} to {:.2} m, {} points", slice.h_min, slice.h_max, slice.point_count);
    render_overlay_svg(&slice.points, &models, Some(&title), path)
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Writes the configured artefacts of a run into `cfg.output.dir`; returns
/// the report path.
pub fn write_outputs(cfg: &PipelineConfig, run: &PipelineRun, format: ReportFormat) -> Result<PathBuf, HarnessError> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    if cfg.output.write_cloud && !matches!(cfg.source, Source::External { .. }) {
        let path = dir.join("cloud.ply");
        write_ply(&run.cloud, &path, PlyFormat::BinaryLittleEndian).map_err(|e| HarnessError::io(&path, e))?;
    }
    if cfg.output.write_svg {
        write_overlay(&run.fit, overlay_slice(&run.fit, cfg.fit.diameter_band), &dir.join("overlay.svg"))?;
    }
    let path = dir.join(match format {
        ReportFormat::Json => "report.json",
        ReportFormat::Csv => "report.csv",
    });
    write_report(&run.report, format, &path)?;
    Ok(path)
}
