use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};

use super::{EllipseModel, FitError, Point2d};

/// Ellipse-constrained direct least-squares conic fit.
///
/// Minimises the algebraic distance `Σ (a x² + b xy + c y² + d x + e y + f)²`
/// subject to `4ac − b² = 1`, using the block decomposition that reduces the
/// generalized eigenproblem to a 3x3 one. Input is centred and scaled to unit
/// RMS radius first, and the result is mapped back.
pub fn fit_ellipse_direct(points: &[Point2d]) -> Result<EllipseModel, FitError> {
    let n = points.len();
    if n < 5 {
        return Err(FitError::TooFewPoints { needed: 5, got: n });
    }
    let nf = n as f64;
    let mean = points.iter().fold(nalgebra::Vector2::zeros(), |acc, p| acc + p.coords) / nf;
    let scale = (points.iter().map(|p| (p.coords - mean).norm_squared()).sum::<f64>() / nf).sqrt();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(FitError::DegenerateConic);
    }

    // Scatter blocks for quadratic terms [x², xy, y²] and linear terms [x, y, 1].
    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let x = (p.x - mean.x) / scale;
        let y = (p.y - mean.y) / scale;
        let q = Vector3::new(x * x, x * y, y * y);
        let l = Vector3::new(x, y, 1.0);
        s1 += q * q.transpose();
        s2 += q * l.transpose();
        s3 += l * l.transpose();
    }
    let s3_eig = s3.symmetric_eigenvalues();
    if s3_eig.min() <= 1e-12 * s3_eig.max() {
        return Err(FitError::DegenerateConic);
    }
    let s3_inv = s3.try_inverse().ok_or(FitError::DegenerateConic)?;
    let t = -(s3_inv * s2.transpose());
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
    let reduced = Matrix3::from_rows(&[
        (m.row(2) / 2.0).into_owned(),
        (-m.row(1)).into_owned(),
        (m.row(0) / 2.0).into_owned(),
    ]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in reduced.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * lambda.re.abs().max(1.0) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 && best.as_ref().is_none_or(|(l, _)| lambda.re < *l) {
            best = Some((lambda.re, v));
        }
    }
    let (_, quad) = best.ok_or(FitError::DegenerateConic)?;
    let lin = t * quad;
    let conic = [quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]];
    let e = conic_to_ellipse(&conic).ok_or(FitError::DegenerateConic)?;
    Ok(EllipseModel {
        center: Point2d::new(e.center.x * scale + mean.x, e.center.y * scale + mean.y),
        semi_major: e.semi_major * scale,
        semi_minor: e.semi_minor * scale,
        rotation: e.rotation,
    })
}

/// Unit vector spanning the (numerical) null space of a 3x3 matrix.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(v_t.row(k).transpose())
}

/// Geometric parameters of `a x² + b xy + c y² + d x + e y + f = 0`.
fn conic_to_ellipse(k: &[f64; 6]) -> Option<EllipseModel> {
    let [a, b, c, d, e, f] = *k;
    if 4.0 * a * c - b * b <= 0.0 {
        return None;
    }
    let q = Matrix2::new(a, b / 2.0, b / 2.0, c);
    let center = q.try_inverse()? * nalgebra::Vector2::new(-d / 2.0, -e / 2.0);
    let f0 = f + 0.5 * (d * center.x + e * center.y);
    let eig = SymmetricEigen::new(q);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    let (s0, s1) = (-f0 / l0, -f0 / l1);
    if !(s0 > 0.0 && s1 > 0.0) {
        return None;
    }
    // The smaller eigenvalue belongs to the major axis.
    let major_idx = if s0 >= s1 { 0 } else { 1 };
    let dir = eig.eigenvectors.column(major_idx);
    let rotation = dir[1].atan2(dir[0]).rem_euclid(PI);
    let rotation = if rotation >= PI { 0.0 } else { rotation };
    Some(EllipseModel {
        center: Point2d::new(center.x, center.y),
        semi_major: s0.max(s1).sqrt(),
        semi_minor: s0.min(s1).sqrt(),
        rotation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn ellipse_samples(e: &EllipseModel, n: usize, arc: f64) -> Vec<Point2d> {
        let (s, c) = e.rotation.sin_cos();
        (0..n)
            .map(|i| {
                let t = arc * i as f64 / n as f64;
                let (x, y) = (e.semi_major * t.cos(), e.semi_minor * t.sin());
                Point2d::new(e.center.x + c * x - s * y, e.center.y + s * x + c * y)
            })
            .collect()
    }

    #[test]
    fn axis_aligned_ellipse_recovered() {
        let truth = EllipseModel { center: Point2d::new(1.0, -0.5), semi_major: 0.25, semi_minor: 0.15, rotation: 0.0 };
        let fit = fit_ellipse_direct(&ellipse_samples(&truth, 60, TAU)).unwrap();
        assert!((fit.semi_major - 0.25).abs() < 1e-6);
        assert!((fit.semi_minor - 0.15).abs() < 1e-6);
        assert!((fit.center - truth.center).norm() < 1e-6);
        let dr = fit.rotation.min(PI - fit.rotation);
        assert!(dr < 1e-6, "rotation {}", fit.rotation);
    }

    #[test]
    fn rotated_partial_ellipse_recovered() {
        let truth = EllipseModel { center: Point2d::new(-3.0, 2.0), semi_major: 0.6, semi_minor: 0.2, rotation: 2.0 };
        let fit = fit_ellipse_direct(&ellipse_samples(&truth, 40, 0.6 * TAU)).unwrap();
        assert!((fit.semi_major - 0.6).abs() < 1e-6);
        assert!((fit.semi_minor - 0.2).abs() < 1e-6);
        assert!((fit.rotation - 2.0).abs() < 1e-6);
    }

    #[test]
    fn circle_is_an_ellipse() {
        let truth = EllipseModel { center: Point2d::new(0.3, 0.3), semi_major: 0.2, semi_minor: 0.2, rotation: 0.0 };
        let fit = fit_ellipse_direct(&ellipse_samples(&truth, 50, TAU)).unwrap();
        assert!((fit.semi_major - 0.2).abs() < 1e-6);
        assert!((fit.semi_minor - 0.2).abs() < 1e-6);
    }

    #[test]
    fn too_few_or_degenerate_points() {
        let pts: Vec<Point2d> = (0..4).map(|i| Point2d::new(i as f64, (i * i) as f64)).collect();
        assert_eq!(fit_ellipse_direct(&pts), Err(FitError::TooFewPoints { needed: 5, got: 4 }));
        let line: Vec<Point2d> = (0..20).map(|i| Point2d::new(i as f64, 0.5 * i as f64)).collect();
        assert_eq!(fit_ellipse_direct(&line), Err(FitError::DegenerateConic));
    }
}
