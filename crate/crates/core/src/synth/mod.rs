//! Synthetic scenes with known ground truth: a finite vertical (or tilted)
//! cylinder standing on a horizontal ground plane.
//!
//! Two capture regimes are modelled:
//!
//! * [`sample_cylinder_surface`]: dense, area-uniform samples of the lateral
//!   surface with Gaussian radial noise. This stands in for geometry exported
//!   from a learned radiance field, which can be sampled at any density.
//! * [`raycast_scan`] / [`simulate_multi_scan`]: a spinning multi-beam range
//!   sensor. Multi-frame capture draws a perturbed "true" pose per frame,
//!   casts from it, and registers the returns with the nominal pose, so pose
//!   error shows up as surface thickening.

mod scan;
mod surface;

pub use scan::{
    frame_scan_config, raycast_scan, raycast_scan_detailed, ring_trajectory, simulate_multi_scan,
    simulate_multi_scan_frames, RayHit, ScanConfig, Surface,
};
pub use surface::{sample_cylinder_arc, sample_cylinder_surface, ArcRange};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Point3, RigidTransform};
use crate::geom;
use crate::seed;

const AXIS_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid cylinder: {0}")]
    InvalidCylinder(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid scan configuration: {0}")]
    InvalidScanConfig(String),
    #[error("invalid pose perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("sensor at ({x:.3}, {y:.3}, {z:.3}) is inside the cylinder")]
    SensorInsideCylinder { x: f64, y: f64, z: f64 },
    #[error("at least one sensor pose is required")]
    NoPoses,
}

/// Finite right circular cylinder: base circle centred at `base_center`,
/// extending `height` meters along the unit `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub diameter: f64,
    pub height: f64,
    pub base_center: [f64; 3],
    pub axis: [f64; 3],
}

impl CylinderSpec {
    /// Upright cylinder with its base centre at `base`.
    pub fn vertical(diameter: f64, height: f64, base: [f64; 3]) -> Self {
        Self {
            diameter,
            height,
            base_center: base,
            axis: [0.0, 0.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidCylinder(m.to_string()));
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return bad("diameter must be positive");
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return bad("height must be positive");
        }
        if self.base_center.iter().any(|v| !v.is_finite()) {
            return bad("base centre must be finite");
        }
        if (self.axis_vec().norm() - 1.0).abs() > AXIS_NORM_TOL {
            return bad("axis must be unit length");
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn axis_vec(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    pub fn base(&self) -> Point3 {
        Point3::from(self.base_center)
    }

    /// Distance from `p` to the axis line minus the radius.
    pub fn radial_residual(&self, p: &Point3) -> f64 {
        geom::distance_to_line(p, &self.base(), &self.axis_vec()) - self.radius()
    }

    /// Coordinate of `p` along the axis, measured from the base.
    pub fn axial_coordinate(&self, p: &Point3) -> f64 {
        (p - self.base()).dot(&self.axis_vec())
    }

    /// Whether `p` lies strictly inside the solid cylinder.
    pub fn contains(&self, p: &Point3) -> bool {
        let h = self.axial_coordinate(p);
        h >= 0.0 && h <= self.height && self.radial_residual(p) < 0.0
    }
}

/// One cylinder on an optional horizontal ground plane at `ground_plane_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub cylinder: CylinderSpec,
    /// `None` removes the ground from the scene.
    pub ground_plane_z: Option<f64>,
}

impl Scene {
    pub fn new(cylinder: CylinderSpec, ground_plane_z: Option<f64>) -> Result<Self, SynthError> {
        let s = Self {
            cylinder,
            ground_plane_z,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.cylinder.validate()?;
        if let Some(z) = self.ground_plane_z {
            if !z.is_finite() {
                return Err(SynthError::InvalidScene("ground plane height must be finite".into()));
            }
            if self.cylinder.base_center[2] < z {
                return Err(SynthError::InvalidScene(
                    "cylinder base lies below the ground plane".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Isotropic Gaussian pose error: per-axis translation sigma in meters and
/// per-axis rotation sigma in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PosePerturbation {
    pub translation_sigma: f64,
    pub rotation_sigma: f64,
}

impl PosePerturbation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.translation_sigma >= 0.0 && self.translation_sigma.is_finite())
            || !(self.rotation_sigma >= 0.0 && self.rotation_sigma.is_finite())
        {
            return Err(SynthError::InvalidPerturbation(
                "sigmas must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Sensor-frame pose error for frame `frame` of a capture seeded with `seed`.
    ///
    /// Draw order from the frame's stream: `tx, ty, tz, rx, ry, rz`; the
    /// rotation is assembled X then Y then Z (see
    /// [`RigidTransform::from_euler_xyz`]).
    pub fn draw(&self, seed: u64, frame: u64) -> RigidTransform {
        if self.translation_sigma == 0.0 && self.rotation_sigma == 0.0 {
            return RigidTransform::identity();
        }
        let mut rng = seed::rng_from_seed(seed::substream(seed, frame));
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let t = Vector3::new(normal(), normal(), normal()) * self.translation_sigma;
        let s = self.rotation_sigma.to_radians();
        let (rx, ry, rz) = (normal() * s, normal() * s, normal() * s);
        RigidTransform::from_euler_xyz(rx, ry, rz, t)
    }
}

/// Zero-mean Gaussian truncated to `[-3 sigma, 3 sigma]` by rejection.
pub(crate) fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 3.0 {
            return z * sigma;
        }
    }
}
