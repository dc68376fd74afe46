use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{truncated_normal, PosePerturbation, Scene, SynthError};
use crate::cloud::{Point3, PointCloud, RigidTransform};
use crate::{par, seed};

/// Ignore intersections closer than this to the ray origin.
const MIN_RANGE: f64 = 1e-9;

/// Spinning multi-beam range sensor.
///
/// Beam rows are spread evenly over `[-vertical_fov/2, +vertical_fov/2]`
/// degrees of elevation (a single row looks horizontally); columns are
/// spread evenly over a full turn starting at the sensor's +X axis.
/// Range noise is Gaussian along the beam, truncated at ±3 sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub n_elevation: usize,
    pub n_azimuth: usize,
    /// Degrees.
    pub vertical_fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    /// 128 x 2048 beams over 90 degrees.
    fn default() -> Self {
        Self {
            n_elevation: 128,
            n_azimuth: 2048,
            vertical_fov: 90.0,
            max_range: 50.0,
            range_noise_sigma: 0.003,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidScanConfig(m.to_string()));
        if self.n_elevation == 0 || self.n_azimuth == 0 {
            return bad("beam grid must have at least one row and one column");
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return bad("max_range must be positive");
        }
        if !(self.range_noise_sigma >= 0.0 && self.range_noise_sigma.is_finite()) {
            return bad("range_noise_sigma must be non-negative");
        }
        if !(0.0..=180.0).contains(&self.vertical_fov) {
            return bad("vertical_fov must lie in [0, 180] degrees");
        }
        Ok(())
    }

    pub fn beam_count(&self) -> usize {
        self.n_elevation * self.n_azimuth
    }

    fn elevation(&self, row: usize) -> f64 {
        if self.n_elevation == 1 {
            return 0.0;
        }
        let fov = self.vertical_fov.to_radians();
        -0.5 * fov + fov * row as f64 / (self.n_elevation - 1) as f64
    }

    /// Unit beam direction in the sensor frame.
    fn beam_direction(&self, row: usize, col: usize) -> Vector3<f64> {
        let el = self.elevation(row);
        let az = TAU * col as f64 / self.n_azimuth as f64;
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Cylinder,
    Ground,
}

/// One registered return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Point3,
    pub surface: Surface,
    pub row: usize,
    pub col: usize,
    /// Noise-free distance to the surface along the beam.
    pub true_range: f64,
}

fn cylinder_hit(scene: &Scene, origin: &Point3, dir: &Vector3<f64>) -> Option<f64> {
    let cyl = &scene.cylinder;
    let a = cyl.axis_vec();
    let w = origin - cyl.base();
    let d_perp = dir - a * dir.dot(&a);
    let w_perp = w - a * w.dot(&a);
    let qa = d_perp.norm_squared();
    if qa < 1e-18 {
        return None;
    }
    let r = cyl.radius();
    let qb = 2.0 * w_perp.dot(&d_perp);
    let qc = w_perp.norm_squared() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let (mut t0, mut t1) = (q / qa, if q != 0.0 { qc / q } else { -q / qa });
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    [t0, t1].into_iter().find(|&t| {
        t > MIN_RANGE && {
            let h = (w + dir * t).dot(&a);
            (0.0..=cyl.height).contains(&h)
        }
    })
}

fn ground_hit(scene: &Scene, origin: &Point3, dir: &Vector3<f64>) -> Option<f64> {
    let z0 = scene.ground_plane_z?;
    if dir.z == 0.0 {
        return None;
    }
    let t = (z0 - origin.z) / dir.z;
    (t > MIN_RANGE).then_some(t)
}

/// Cast every beam from `true_pose` and register returns with `register_pose`.
fn scan_frame(
    scene: &Scene,
    true_pose: &RigidTransform,
    register_pose: &RigidTransform,
    cfg: &ScanConfig,
) -> Result<Vec<RayHit>, SynthError> {
    cfg.validate()?;
    scene.validate()?;
    let origin = Point3::from(*true_pose.translation());
    if scene.cylinder.contains(&origin) {
        return Err(SynthError::SensorInsideCylinder {
            x: origin.x,
            y: origin.y,
            z: origin.z,
        });
    }

    let rows = par::map_range(0..cfg.n_elevation, |row| {
        let mut rng = seed::rng_from_seed(seed::substream(cfg.seed, row as u64));
        let mut hits = Vec::new();
        for col in 0..cfg.n_azimuth {
            let local = cfg.beam_direction(row, col);
            let dir = true_pose.apply_vector(&local);
            let cyl = cylinder_hit(scene, &origin, &dir).map(|t| (t, Surface::Cylinder));
            let gnd = ground_hit(scene, &origin, &dir).map(|t| (t, Surface::Ground));
            let nearest = match (cyl, gnd) {
                (Some(c), Some(g)) => Some(if g.0 < c.0 { g } else { c }),
                (c, g) => c.or(g),
            };
            let Some((t, surface)) = nearest.filter(|(t, _)| *t <= cfg.max_range) else {
                continue;
            };
            let range = t + truncated_normal(&mut rng, cfg.range_noise_sigma);
            hits.push(RayHit {
                point: register_pose.apply(&Point3::from(local * range)),
                surface,
                row,
                col,
                true_range: t,
            });
        }
        hits
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Returns with per-beam bookkeeping; see [`raycast_scan`].
pub fn raycast_scan_detailed(
    scene: &Scene,
    sensor_pose: &RigidTransform,
    cfg: &ScanConfig,
) -> Result<Vec<RayHit>, SynthError> {
    scan_frame(scene, sensor_pose, sensor_pose, cfg)
}

/// One sensor revolution from `sensor_pose`; beams that reach neither the
/// cylinder's lateral surface nor the ground within `max_range` yield no point.
pub fn raycast_scan(
    scene: &Scene,
    sensor_pose: &RigidTransform,
    cfg: &ScanConfig,
) -> Result<PointCloud, SynthError> {
    let hits = raycast_scan_detailed(scene, sensor_pose, cfg)?;
    Ok(hits_to_cloud(&hits))
}

fn hits_to_cloud(hits: &[RayHit]) -> PointCloud {
    PointCloud::new(hits.iter().map(|h| h.point).collect()).expect("finite hits")
}

/// Scan configuration used for frame `frame` of a multi-frame capture: the
/// same sensor with its noise stream split off `cfg.seed`.
pub fn frame_scan_config(cfg: &ScanConfig, frame: usize) -> ScanConfig {
    ScanConfig {
        seed: seed::substream(cfg.seed, frame as u64),
        ..*cfg
    }
}

/// Per-frame registered clouds of a misaligned multi-frame capture.
///
/// Frame `k` is cast from `poses[k] ∘ perturb.draw(seed, k)` and registered
/// with `poses[k]`.
pub fn simulate_multi_scan_frames(
    scene: &Scene,
    poses: &[RigidTransform],
    cfg: &ScanConfig,
    perturb: &PosePerturbation,
    seed: u64,
) -> Result<Vec<PointCloud>, SynthError> {
    if poses.is_empty() {
        return Err(SynthError::NoPoses);
    }
    perturb.validate()?;
    let frames = par::map_range(0..poses.len(), |k| {
        let nominal = &poses[k];
        let truth = nominal.compose(&perturb.draw(seed, k as u64));
        scan_frame(scene, &truth, nominal, &frame_scan_config(cfg, k)).map(|h| hits_to_cloud(&h))
    });
    frames.into_iter().collect()
}

/// All frames of [`simulate_multi_scan_frames`] concatenated in pose order.
pub fn simulate_multi_scan(
    scene: &Scene,
    poses: &[RigidTransform],
    cfg: &ScanConfig,
    perturb: &PosePerturbation,
    seed: u64,
) -> Result<PointCloud, SynthError> {
    let frames = simulate_multi_scan_frames(scene, poses, cfg, perturb, seed)?;
    Ok(PointCloud::concat(&frames))
}

/// `n` level sensor poses evenly spaced on a horizontal circle.
pub fn ring_trajectory(center_xy: [f64; 2], radius: f64, height: f64, n: usize) -> Vec<RigidTransform> {
    (0..n)
        .map(|k| {
            let phi = TAU * k as f64 / n as f64;
            RigidTransform::from_translation(Vector3::new(
                center_xy[0] + radius * phi.cos(),
                center_xy[1] + radius * phi.sin(),
                height,
            ))
        })
        .collect()
}
