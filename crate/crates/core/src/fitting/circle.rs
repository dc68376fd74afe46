use std::cmp::Ordering;

use super::{CircleModel, FitError, FitResult, Point2d, RansacConfig};
use crate::{par, seed};

/// Relative collinearity tolerance for the minimal solver.
const COLLINEAR_EPS: f64 = 1e-12;

/// Circumcircle of three points.
pub fn circle_from_3_points(p1: &Point2d, p2: &Point2d, p3: &Point2d) -> Result<CircleModel, FitError> {
    let b = p2 - p1;
    let c = p3 - p1;
    let d = 2.0 * (b.x * c.y - b.y * c.x);
    let b2 = b.norm_squared();
    let c2 = c.norm_squared();
    if !(d.abs() > COLLINEAR_EPS * 2.0 * (b2 * c2).sqrt()) {
        return Err(FitError::DegenerateSample);
    }
    let ux = (c.y * b2 - b.y * c2) / d;
    let uy = (b.x * c2 - c.x * b2) / d;
    let radius = ux.hypot(uy);
    if !radius.is_finite() {
        return Err(FitError::DegenerateSample);
    }
    Ok(CircleModel {
        center: Point2d::new(p1.x + ux, p1.y + uy),
        radius,
    })
}

/// Taubin algebraic circle fit.
///
/// Data are centred on their mean and scaled to unit RMS radius before the
/// moments are formed; the smallest root of the Taubin characteristic
/// polynomial is found by Newton's method from zero.
pub fn fit_circle_algebraic(points: &[Point2d]) -> Result<CircleModel, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (mx, my) = (sx / nf, sy / nf);
    let spread = (points
        .iter()
        .map(|p| (p.x - mx).powi(2) + (p.y - my).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(FitError::RankDeficient);
    }

    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let xi = (p.x - mx) / spread;
        let yi = (p.y - my) / spread;
        let zi = xi * xi + yi * yi;
        mxy += xi * yi;
        mxx += xi * xi;
        myy += yi * yi;
        mxz += xi * zi;
        myz += yi * zi;
        mzz += zi * zi;
    }
    mxx /= nf;
    myy /= nf;
    mxy /= nf;
    mxz /= nf;
    myz /= nf;
    mzz /= nf;

    let mz = mxx + myy;
    let cov_xy = mxx * myy - mxy * mxy;
    // Points on a line: the 2x2 scatter is singular.
    if cov_xy <= 1e-14 * mz * mz {
        return Err(FitError::RankDeficient);
    }
    let var_z = mzz - mz * mz;
    let a3 = 4.0 * mz;
    let a2 = -3.0 * mz * mz - mzz;
    let a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    let a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    let a22 = a2 + a2;
    let a33 = a3 + a3 + a3;

    let mut x = 0.0f64;
    let mut y = a0;
    for _ in 0..99 {
        let dy = a1 + x * (a22 + a33 * x);
        let x_new = x - y / dy;
        if x_new == x || !x_new.is_finite() {
            break;
        }
        let y_new = a0 + x_new * (a1 + x_new * (a2 + x_new * a3));
        if y_new.abs() >= y.abs() {
            break;
        }
        x = x_new;
        y = y_new;
    }

    let det = x * x - x * mz + cov_xy;
    if det.abs() < f64::EPSILON {
        return Err(FitError::RankDeficient);
    }
    let cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    let cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    let radius = (cx * cx + cy * cy + mz).sqrt() * spread;
    let center = Point2d::new(cx * spread + mx, cy * spread + my);
    if !(radius.is_finite() && radius > 0.0 && center.x.is_finite() && center.y.is_finite()) {
        return Err(FitError::RankDeficient);
    }
    Ok(CircleModel { center, radius })
}

struct Hypothesis {
    iteration: usize,
    model: CircleModel,
    count: usize,
    rms: f64,
}

/// Better hypothesis compares greater: more inliers, then lower RMS, then
/// lower iteration index. This is a total order, so the winner does not
/// depend on evaluation order.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    a.count
        .cmp(&b.count)
        .then_with(|| b.rms.total_cmp(&a.rms))
        .then_with(|| b.iteration.cmp(&a.iteration))
}

fn inliers_of(points: &[Point2d], model: &CircleModel, threshold: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut sse = 0.0;
    for (i, p) in points.iter().enumerate() {
        let r = model.residual(p);
        if r.abs() <= threshold {
            idx.push(i);
            sse += r * r;
        }
    }
    let rms = if idx.is_empty() { 0.0 } else { (sse / idx.len() as f64).sqrt() };
    (idx, rms)
}

/// RANSAC circle fit.
///
/// Every iteration draws three distinct indices from its own substream of
/// `cfg.seed`, so hypotheses can be scored in parallel with identical
/// results. The winning hypothesis's inliers are re-fitted with
/// [`fit_circle_algebraic`]; the refined circle is kept when it still has
/// at least the minimum consensus, and inliers are always reported against
/// the returned model.
pub fn ransac_circle(points: &[Point2d], cfg: &RansacConfig) -> Result<FitResult<CircleModel>, FitError> {
    cfg.validate()?;
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints { needed: 3, got: n });
    }
    let required = cfg.min_inliers_for(n);
    let thr = cfg.inlier_threshold;

    let hypotheses = par::map_range(0..cfg.iterations, |iteration| {
        let mut rng = seed::rng_from_seed(seed::substream(cfg.seed, iteration as u64));
        let s = rand::seq::index::sample(&mut rng, n, 3);
        let model = circle_from_3_points(&points[s.index(0)], &points[s.index(1)], &points[s.index(2)]).ok()?;
        let mut count = 0usize;
        let mut sse = 0.0;
        for p in points {
            let r = model.residual(p);
            if r.abs() <= thr {
                count += 1;
                sse += r * r;
            }
        }
        let rms = (sse / count.max(1) as f64).sqrt();
        Some(Hypothesis { iteration, model, count, rms })
    });

    let best = hypotheses.into_iter().flatten().max_by(rank);
    let best = match best {
        Some(h) if h.count >= required => h,
        other => {
            return Err(FitError::ConsensusFailure {
                best: other.map_or(0, |h| h.count),
                required,
            })
        }
    };

    let (hyp_inliers, hyp_rms) = inliers_of(points, &best.model, thr);
    let subset: Vec<Point2d> = hyp_inliers.iter().map(|&i| points[i]).collect();
    let refined = fit_circle_algebraic(&subset)
        .ok()
        .map(|m| (m, inliers_of(points, &m, thr)))
        .filter(|(_, (idx, _))| idx.len() >= required);

    let (model, inlier_indices, rms_residual) = match refined {
        Some((m, (idx, rms))) => (m, idx, rms),
        None => (best.model, hyp_inliers, hyp_rms),
    };
    Ok(FitResult {
        model,
        inlier_indices,
        rms_residual,
        iterations_used: cfg.iterations,
    })
}
