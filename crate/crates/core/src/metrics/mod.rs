//! Reconstruction quality measures.

mod image;

pub use self::image::{load_image, psnr, ssim, ImageError, ImageGrid, Psnr, RenderQualityReport};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::fitting::CylinderModel;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot compute statistics of an empty cloud")]
    EmptyCloud,
    #[error("ground-truth diameter must be positive, got {0}")]
    NonPositiveGroundTruth(f64),
}

/// Spread of point-to-surface distances about a cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); zero for one point.
    pub std: f64,
    pub rms: f64,
}

/// Residual per point = distance to the axis − radius.
pub fn radial_residual_stats(cloud: &PointCloud, model: &CylinderModel) -> Result<RadialStats, MetricsError> {
    if cloud.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let res = crate::par::map_slice(cloud.points(), |p| model.residual(p));
    Ok(residual_stats(&res))
}

pub(crate) fn residual_stats(res: &[f64]) -> RadialStats {
    let n = res.len();
    let nf = n as f64;
    let mean = res.iter().sum::<f64>() / nf;
    let ss = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
    let std = if n > 1 { (ss / (nf - 1.0)).sqrt() } else { 0.0 };
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / nf).sqrt();
    RadialStats { count: n, mean, std, rms }
}

/// Estimated vs. true diameter. Percent error is relative to the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub estimated: f64,
    pub ground_truth: f64,
    pub abs_error: f64,
    pub pct_error: f64,
}

pub fn diameter_error(estimated: f64, ground_truth: f64) -> Result<DiameterReport, MetricsError> {
    if !(ground_truth > 0.0) {
        return Err(MetricsError::NonPositiveGroundTruth(ground_truth));
    }
    let abs_error = (estimated - ground_truth).abs();
    Ok(DiameterReport {
        estimated,
        ground_truth,
        abs_error,
        pct_error: 100.0 * abs_error / ground_truth,
    })
}

impl DiameterReport {
    /// Estimate minus ground truth; negative when the fit under-sizes.
    pub fn signed_error(&self) -> f64 {
        self.estimated - self.ground_truth
    }
}

impl fmt::Display for DiameterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "diameter {:.4} m vs {:.4} m: error {:.4} m ({:.2}%)",
            self.estimated, self.ground_truth, self.abs_error, self.pct_error
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::fit_cylinder_multislice;
    use crate::synth::{sample_cylinder_surface, CylinderSpec};
    use crate::Point3;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn true_model() -> CylinderModel {
        CylinderModel { axis_point: Point3::origin(), axis_dir: Vector3::z(), radius: 0.2, z_extent: (0.0, 3.0) }
    }

    #[test]
    fn noiseless_stats_are_zero() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 5000, 0.0, 1).unwrap();
        let s = radial_residual_stats(&c, &true_model()).unwrap();
        assert!(s.mean.abs() < 1e-12 && s.std < 1e-12 && s.rms < 1e-12);
    }

    #[test]
    fn gaussian_noise_std() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 100_000, 0.005, 2).unwrap();
        let s = radial_residual_stats(&c, &true_model()).unwrap();
        assert!((0.0048..=0.0052).contains(&s.std), "{}", s.std);
    }

    #[test]
    fn stats_against_fitted_model() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 20_000, 0.002, 3).unwrap();
        let fit = fit_cylinder_multislice(&c, &Default::default(), 10).unwrap();
        let s = radial_residual_stats(&c, &fit.model).unwrap();
        assert!((s.std - 0.002).abs() < 2e-4);
    }

    #[test]
    fn empty_cloud_is_error() {
        assert_eq!(radial_residual_stats(&PointCloud::empty(), &true_model()), Err(MetricsError::EmptyCloud));
    }

    #[test]
    fn diameter_reports() {
        let r = diameter_error(0.4, 0.4).unwrap();
        assert_eq!((r.abs_error, r.pct_error), (0.0, 0.0));

        let r = diameter_error(0.395, 0.400).unwrap();
        assert!((r.abs_error - 0.005).abs() < 1e-12);
        assert!((r.pct_error - 1.25).abs() < 1e-9);
        assert!(r.to_string().contains("(1.25%)"));

        let r = diameter_error(0.378, 0.400).unwrap();
        assert!((r.abs_error - 0.022).abs() < 1e-12);
        assert!((r.pct_error - 5.5).abs() < 1e-9);
        assert!(r.signed_error() < 0.0);

        assert!(diameter_error(0.4, 0.0).is_err());
        assert!(diameter_error(0.4, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn rms_mean_std_identity(res in proptest::collection::vec(-1.0f64..1.0, 1..500)) {
            let s = residual_stats(&res);
            let n = s.count as f64;
            let lhs = s.rms * s.rms;
            let rhs = s.mean * s.mean + (n - 1.0) / n * s.std * s.std;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1e-300) + 1e-15);
        }

        #[test]
        fn diameter_identities(est in 0.0f64..2.0, gt in 0.01f64..2.0) {
            let r = diameter_error(est, gt).unwrap();
            prop_assert_eq!(r.abs_error, (est - gt).abs());
            prop_assert_eq!(r.pct_error, 100.0 * r.abs_error / gt);
        }
    }
}
