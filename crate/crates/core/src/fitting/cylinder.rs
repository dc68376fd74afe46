use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    fit_ellipse_direct, ransac_circle, CircleModel, CylinderModel, EllipseModel, FitError, FitResult,
    Point2d, RansacConfig,
};
use crate::cloud::{Point3, PointCloud};
use crate::{geom, par, seed};

/// Below this height/width ratio the cloud is treated as a short section of
/// an upright stem and the axis is taken as exactly vertical.
const VERTICAL_FALLBACK_RATIO: f64 = 1.5;

/// Principal direction of the cloud, with non-negative z.
///
/// Height is the z extent of the bounding box and width the larger of its x
/// and y extents; squat clouds (ratio < 1.5) return `+Z` without PCA.
pub fn estimate_axis(cloud: &PointCloud) -> Result<Vector3<f64>, FitError> {
    let pts = cloud.points();
    if pts.len() < 3 {
        return Err(FitError::TooFewPoints { needed: 3, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let scale = pts.iter().map(|p| p.coords.amax()).fold(0.0f64, f64::max).max(1.0);
    if !(cov.trace() > 1e-20 * scale * scale) {
        return Err(FitError::Axis("point distribution has no spread".into()));
    }

    let (mut lo, mut hi) = (pts[0].coords, pts[0].coords);
    for p in pts {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    let ext = hi - lo;
    let width = ext.x.max(ext.y);
    if width > 0.0 && ext.z / width < VERTICAL_FALLBACK_RATIO {
        return Ok(Vector3::z());
    }

    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let axis = eig.eigenvectors.column(k).normalize();
    if !axis.iter().all(|v| v.is_finite()) {
        return Err(FitError::Axis("eigen decomposition failed".into()));
    }
    Ok(orient_up(axis))
}

fn orient_up(a: Vector3<f64>) -> Vector3<f64> {
    let flip = a.z < 0.0 || (a.z == 0.0 && (a.x < 0.0 || (a.x == 0.0 && a.y < 0.0)));
    if flip {
        -a
    } else {
        a
    }
}

/// Like [`project_slice`], also returning each projected point's index in the cloud.
pub fn project_slice_indexed(
    cloud: &PointCloud,
    axis: &Vector3<f64>,
    h_min: f64,
    h_max: f64,
) -> (Vec<usize>, Vec<Point2d>) {
    let (u, v) = geom::plane_basis(axis);
    cloud
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let h = p.coords.dot(axis);
            (h >= h_min && h < h_max).then(|| (i, Point2d::new(p.coords.dot(&u), p.coords.dot(&v))))
        })
        .unzip()
}

/// Points with axial coordinate `p·axis` in `[h_min, h_max)`, expressed in
/// the plane basis of [`geom::plane_basis`].
pub fn project_slice(cloud: &PointCloud, axis: &Vector3<f64>, h_min: f64, h_max: f64) -> Vec<Point2d> {
    project_slice_indexed(cloud, axis, h_min, h_max).1
}

/// Per-band outcome of the multi-slice fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub h_min: f64,
    pub h_max: f64,
    pub point_count: usize,
    /// `None` when circle consensus failed for this band.
    pub circle: Option<FitResult<CircleModel>>,
    /// Direct ellipse fit of the circle inliers, when one exists.
    pub ellipse: Option<EllipseModel>,
    /// Projected slice points, in the plane basis of `slice_axis`.
    #[serde(skip)]
    pub points: Vec<Point2d>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultisliceFit {
    pub fit: FitResult<CylinderModel>,
    /// Axis the reported slices were cut along.
    pub slice_axis: Vector3<f64>,
    pub slices: Vec<SliceFit>,
}

/// Fit a cylinder by RANSAC circles on axial slices; see
/// [`fit_cylinder_slices`] for the procedure.
pub fn fit_cylinder_multislice(
    cloud: &PointCloud,
    cfg: &RansacConfig,
    n_slices: usize,
) -> Result<FitResult<CylinderModel>, FitError> {
    fit_cylinder_slices(cloud, cfg, n_slices).map(|m| m.fit)
}

struct SlicePass {
    slices: Vec<SliceFit>,
    axis_dir: Vector3<f64>,
    axis_point: Point3,
    radius: f64,
    /// Number of slices with a circle.
    fitted: usize,
}

fn slice_pass(
    cloud: &PointCloud,
    axis: &Vector3<f64>,
    cfg: &RansacConfig,
    n_slices: usize,
) -> Result<SlicePass, FitError> {
    let (u, v) = geom::plane_basis(axis);
    let (h_lo, h_hi) = cloud
        .points()
        .iter()
        .map(|p| p.coords.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h), hi.max(h)));
    let band = (h_hi - h_lo) / n_slices as f64;

    let slices: Vec<SliceFit> = par::map_range(0..n_slices, |k| {
        let h_min = h_lo + band * k as f64;
        let h_max = if k + 1 == n_slices { f64::INFINITY } else { h_lo + band * (k + 1) as f64 };
        let (_, pts) = project_slice_indexed(cloud, axis, h_min, h_max);
        let slice_cfg = RansacConfig { seed: seed::substream(cfg.seed, k as u64), ..*cfg };
        let circle = ransac_circle(&pts, &slice_cfg).ok();
        let ellipse = circle.as_ref().and_then(|c| {
            let inl: Vec<Point2d> = c.inlier_indices.iter().map(|&i| pts[i]).collect();
            fit_ellipse_direct(&inl).ok()
        });
        SliceFit {
            h_min,
            h_max: h_max.min(h_hi),
            point_count: pts.len(),
            circle,
            ellipse,
            points: pts,
        }
    });

    let ok: Vec<(f64, &CircleModel)> = slices
        .iter()
        .filter_map(|s| s.circle.as_ref().map(|c| (0.5 * (s.h_min + s.h_max), &c.model)))
        .collect();
    let failed = n_slices - ok.len();
    if ok.is_empty() || failed * 2 > n_slices {
        return Err(FitError::SliceConsensus { failed, total: n_slices });
    }

    // Least-squares line c(h) = c_mean + beta * (h - h_mean) through the slice centres.
    let m = ok.len() as f64;
    let h_mean = ok.iter().map(|(h, _)| h).sum::<f64>() / m;
    let c_mean = ok.iter().fold(nalgebra::Vector2::zeros(), |acc, (_, c)| acc + c.center.coords) / m;
    let shh: f64 = ok.iter().map(|(h, _)| (h - h_mean).powi(2)).sum();
    let beta = if ok.len() >= 2 && shh > 0.0 {
        ok.iter()
            .fold(nalgebra::Vector2::zeros(), |acc, (h, c)| acc + (c.center.coords - c_mean) * (h - h_mean))
            / shh
    } else {
        nalgebra::Vector2::zeros()
    };
    let axis_dir = if beta == nalgebra::Vector2::zeros() {
        *axis
    } else {
        orient_up((axis + u * beta.x + v * beta.y).normalize())
    };
    let axis_point = Point3::from(u * c_mean.x + v * c_mean.y + axis * h_mean);

    let mut radii: Vec<f64> = ok.iter().map(|(_, c)| c.radius).collect();
    radii.sort_by(f64::total_cmp);
    let mid = radii.len() / 2;
    let radius = if radii.len() % 2 == 1 { radii[mid] } else { 0.5 * (radii[mid - 1] + radii[mid]) };
    let fitted = ok.len();

    Ok(SlicePass { slices, axis_dir, axis_point, radius, fitted })
}

/// Multi-slice cylinder fit with per-slice detail.
///
/// 1. Estimate the axis ([`estimate_axis`]).
/// 2. Split the axial extent into `n_slices` equal bands (the last band is
///    closed at the top) and run [`ransac_circle`] on each. Band `k` uses the
///    seed `substream(cfg.seed, k)`.
/// 3. Regress the slice centres linearly against band mid-height; the fitted
///    line, lifted to 3D, is the refined axis. A single successful slice keeps
///    the initial direction through its centre.
/// 4. When the axis was refined, cut and fit the bands once more along the
///    refined axis, so thick bands are not smeared by the initial tilt.
/// 5. Radius is the median slice radius. Inliers are all points within the
///    threshold of the final cylinder, and `rms_residual` is their RMS radial
///    residual.
///
/// Fails when more than half of the bands have no circle consensus.
pub fn fit_cylinder_slices(
    cloud: &PointCloud,
    cfg: &RansacConfig,
    n_slices: usize,
) -> Result<MultisliceFit, FitError> {
    cfg.validate()?;
    if n_slices == 0 {
        return Err(FitError::InvalidConfig("n_slices must be at least 1".into()));
    }
    let initial = estimate_axis(cloud)?;
    let mut slice_axis = initial;
    let mut pass = slice_pass(cloud, &initial, cfg, n_slices)?;
    if pass.fitted >= 2 {
        // The second pass may lose consensus where the first had it; keep the
        // first pass in that case.
        if let Ok(second) = slice_pass(cloud, &pass.axis_dir, cfg, n_slices) {
            slice_axis = pass.axis_dir;
            pass = second;
        }
    }

    let mut model = CylinderModel {
        axis_point: pass.axis_point,
        axis_dir: pass.axis_dir,
        radius: pass.radius,
        z_extent: (0.0, 0.0),
    };
    let mut inlier_indices = Vec::new();
    let mut sse = 0.0;
    let (mut z_lo, mut z_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, p) in cloud.points().iter().enumerate() {
        let r = model.residual(p);
        if r.abs() <= cfg.inlier_threshold {
            inlier_indices.push(i);
            sse += r * r;
            let z = (p - model.axis_point).dot(&model.axis_dir);
            z_lo = z_lo.min(z);
            z_hi = z_hi.max(z);
        }
    }
    let required = cfg.min_inliers_for(cloud.len());
    if inlier_indices.len() < required {
        return Err(FitError::ConsensusFailure { best: inlier_indices.len(), required });
    }
    model.z_extent = (z_lo, z_hi);
    let rms_residual = (sse / inlier_indices.len() as f64).sqrt();

    Ok(MultisliceFit {
        fit: FitResult {
            model,
            inlier_indices,
            rms_residual,
            iterations_used: cfg.iterations * n_slices * if slice_axis == initial { 1 } else { 2 },
        },
        slice_axis,
        slices: pass.slices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_cylinder_surface, CylinderSpec};

    fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn vertical_axis_from_noiseless_samples() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 100_000, 0.0, 2).unwrap();
        let a = estimate_axis(&c).unwrap();
        assert!(angle_deg(&a, &Vector3::z()).to_radians() < 1e-3);
    }

    #[test]
    fn tilted_axis_recovered() {
        let true_axis = Vector3::new(0.0, -10f64.to_radians().sin(), 10f64.to_radians().cos());
        let spec = CylinderSpec { diameter: 0.4, height: 3.0, base_center: [0.0; 3], axis: true_axis.into() };
        let c = sample_cylinder_surface(&spec, 5000, 0.002, 3).unwrap();
        let a = estimate_axis(&c).unwrap();
        assert!(angle_deg(&a, &true_axis) < 1.0);
        assert!(a.z > 0.0);
    }

    #[test]
    fn degenerate_clouds_rejected() {
        let same = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0); 10]).unwrap();
        assert!(matches!(estimate_axis(&same), Err(FitError::Axis(_))));
        let two = PointCloud::new(vec![Point3::origin(), Point3::new(0.0, 0.0, 1.0)]).unwrap();
        assert!(matches!(estimate_axis(&two), Err(FitError::TooFewPoints { .. })));
    }

    #[test]
    fn squat_cloud_falls_back_to_vertical() {
        let spec = CylinderSpec { diameter: 0.4, height: 0.3, base_center: [0.0; 3], axis: Vector3::new(0.1, 0.0, 1.0).normalize().into() };
        let c = sample_cylinder_surface(&spec, 2000, 0.0, 1).unwrap();
        assert_eq!(estimate_axis(&c).unwrap(), Vector3::z());
    }

    #[test]
    fn slice_is_half_open() {
        let c = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.5), Point3::new(1.0, 2.0, 1.5), Point3::new(0.0, 0.0, 2.0)]).unwrap();
        let s = project_slice(&c, &Vector3::z(), 1.0, 2.0);
        assert_eq!(s, vec![Point2d::new(1.0, 2.0)]);
    }

    #[test]
    fn noiseless_slice_projects_to_circle() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.3, -0.2, 0.0]), 4000, 0.0, 5).unwrap();
        let s = project_slice(&c, &Vector3::z(), 1.0, 1.5);
        assert!(!s.is_empty());
        for p in &s {
            assert!(((p - Point2d::new(0.3, -0.2)).norm() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_cylinder_recovered() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 20_000, 0.0, 7).unwrap();
        let fit = fit_cylinder_multislice(&c, &RansacConfig::default(), 10).unwrap();
        assert!((fit.model.radius - 0.2).abs() < 1e-6, "{}", fit.model.radius);
        assert!(angle_deg(&fit.model.axis_dir, &Vector3::z()) < 0.01);
        assert_eq!(fit.inlier_indices.len(), c.len());
        let (lo, hi) = fit.model.z_extent;
        assert!((hi - lo - 3.0).abs() < 1e-2);
    }

    #[test]
    fn single_slice_keeps_initial_axis() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 3000, 0.0, 1).unwrap();
        let m = fit_cylinder_slices(&c, &RansacConfig::default(), 1).unwrap();
        assert_eq!(m.fit.model.axis_dir, m.slice_axis);
        assert_eq!(m.slice_axis, estimate_axis(&c).unwrap());
        let circle = m.slices[0].circle.as_ref().unwrap();
        assert_eq!(m.fit.model.radius, circle.model.radius);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let cfg = RansacConfig::default();
        assert!(fit_cylinder_multislice(&PointCloud::empty(), &cfg, 5).is_err());
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 100, 0.0, 1).unwrap();
        assert!(matches!(fit_cylinder_multislice(&c, &cfg, 0), Err(FitError::InvalidConfig(_))));
    }

    #[test]
    fn too_sparse_slices_fail_consensus() {
        let c = sample_cylinder_surface(&CylinderSpec::vertical(0.4, 3.0, [0.0; 3]), 40, 0.0, 1).unwrap();
        let err = fit_cylinder_multislice(&c, &RansacConfig::default(), 20).unwrap_err();
        assert!(err.is_consensus_failure(), "{err:?}");
    }
}
