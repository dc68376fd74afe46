//! Robust primitive fitting for stem/pipe cross-sections.
//!
//! The cylinder pipeline slices the cloud along an estimated axis, fits a
//! circle to each slice with RANSAC (three-point hypotheses, Taubin
//! refinement), lifts the slice centres back to 3D to refine the axis, and
//! takes the median slice radius. A direct ellipse fit is available for the
//! same slices so circle and ellipse cross-sections can be compared.

mod circle;
mod cylinder;
mod ellipse;

pub use circle::{circle_from_3_points, fit_circle_algebraic, ransac_circle};
pub use cylinder::{
    estimate_axis, fit_cylinder_multislice, fit_cylinder_slices, project_slice,
    project_slice_indexed, MultisliceFit, SliceFit,
};
pub use ellipse::fit_ellipse_direct;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::Point3;
pub use crate::geom::Point2d;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate minimal sample (collinear or coincident points)")]
    DegenerateSample,
    #[error("rank-deficient least-squares system")]
    RankDeficient,
    #[error("points do not determine an ellipse")]
    DegenerateConic,
    #[error("no model reached {required} inliers (best had {best})")]
    ConsensusFailure { best: usize, required: usize },
    #[error("axis estimation failed: {0}")]
    Axis(String),
    #[error("circle consensus failed in {failed} of {total} slices")]
    SliceConsensus { failed: usize, total: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
}

impl FitError {
    /// True for failures of robust consensus rather than malformed input.
    pub fn is_consensus_failure(&self) -> bool {
        matches!(self, Self::ConsensusFailure { .. } | Self::SliceConsensus { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleModel {
    pub center: Point2d,
    pub radius: f64,
}

impl CircleModel {
    /// Signed distance from `p` to the circle (positive outside).
    pub fn residual(&self, p: &Point2d) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseModel {
    pub center: Point2d,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from +x, radians in `[0, π)`.
    pub rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderModel {
    pub axis_point: Point3,
    /// Unit direction with non-negative z.
    pub axis_dir: Vector3<f64>,
    pub radius: f64,
    /// Extent of the inliers along `axis_dir`, measured from `axis_point`.
    pub z_extent: (f64, f64),
}

impl CylinderModel {
    pub fn residual(&self, p: &Point3) -> f64 {
        crate::geom::distance_to_line(p, &self.axis_point, &self.axis_dir) - self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Meters.
    pub inlier_threshold: f64,
    /// `None` means `max(10, ceil(5% of the input))`.
    pub min_inliers: Option<usize>,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            inlier_threshold: 0.01,
            min_inliers: None,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.iterations == 0 {
            return Err(FitError::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(FitError::InvalidConfig("inlier_threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn min_inliers_for(&self, n_points: usize) -> usize {
        self.min_inliers
            .unwrap_or_else(|| 10.max(n_points.div_ceil(20)))
    }
}

/// Outcome of a robust fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<M> {
    pub model: M,
    /// Indices into the fitted input, ascending.
    pub inlier_indices: Vec<usize>,
    /// Root mean square of the inliers' residuals.
    pub rms_residual: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Circle(CircleModel),
    Ellipse(EllipseModel),
    Cylinder(CylinderModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterEstimate {
    pub diameter: f64,
    /// Full major/minor axis lengths, reported for ellipses only.
    pub major: Option<f64>,
    pub minor: Option<f64>,
}

/// Circle and cylinder: twice the radius. Ellipse: the diameter of the
/// circle with the same area, `2·sqrt(a·b)`.
pub fn model_diameter(model: &Model) -> DiameterEstimate {
    match model {
        Model::Circle(c) => DiameterEstimate {
            diameter: 2.0 * c.radius,
            major: None,
            minor: None,
        },
        Model::Cylinder(c) => DiameterEstimate {
            diameter: 2.0 * c.radius,
            major: None,
            minor: None,
        },
        Model::Ellipse(e) => DiameterEstimate {
            diameter: 2.0 * (e.semi_major * e.semi_minor).sqrt(),
            major: Some(2.0 * e.semi_major),
            minor: Some(2.0 * e.semi_minor),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diameters() {
        let c = Model::Circle(CircleModel { center: Point2d::origin(), radius: 0.2 });
        assert_eq!(model_diameter(&c).diameter, 0.4);
        let e = |a, b| {
            Model::Ellipse(EllipseModel { center: Point2d::origin(), semi_major: a, semi_minor: b, rotation: 0.0 })
        };
        assert!((model_diameter(&e(0.2, 0.2)).diameter - 0.4).abs() < 1e-15);
        let d = model_diameter(&e(0.25, 0.16));
        assert!((d.diameter - 0.4).abs() < 1e-15);
        assert_eq!(d.major, Some(0.5));
        assert_eq!(d.minor, Some(0.32));
    }

    #[test]
    fn default_min_inliers() {
        let cfg = RansacConfig::default();
        assert_eq!(cfg.min_inliers_for(50), 10);
        assert_eq!(cfg.min_inliers_for(1000), 50);
        assert_eq!(cfg.min_inliers_for(1001), 51);
        assert_eq!(RansacConfig { min_inliers: Some(3), ..cfg }.min_inliers_for(1000), 3);
    }

    #[test]
    fn config_validation() {
        assert!(RansacConfig { iterations: 0, ..Default::default() }.validate().is_err());
        assert!(RansacConfig { inlier_threshold: 0.0, ..Default::default() }.validate().is_err());
    }
}
