use nalgebra::{Point2, Vector3};

use crate::cloud::Point3;

pub type Point2d = Point2<f64>;

/// Orthonormal `(u, v)` spanning the plane orthogonal to the unit vector
/// `axis`, with `u × v = axis`.
///
/// `u` is the projection of +X onto the plane, or of +Y when the axis is
/// within ~25° of X. For the vertical axis this gives `u = +X`, `v = +Y`,
/// so projected coordinates coincide with world `(x, y)`.
pub fn plane_basis(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let reference = if axis.x.abs() > 0.9 {
        Vector3::y()
    } else {
        Vector3::x()
    };
    let u = (reference - axis * reference.dot(axis)).normalize();
    let v = axis.cross(&u);
    (u, v)
}

/// Perpendicular distance from `p` to the line through `origin` along unit `dir`.
pub fn distance_to_line(p: &Point3, origin: &Point3, dir: &Vector3<f64>) -> f64 {
    let w = p - origin;
    (w - dir * w.dot(dir)).norm()
}
