use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Point3, PointCloud};

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("rotation is not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("rotation has determinant {0}, expected +1")]
    Reflection(f64),
    #[error("transform has non-finite entries")]
    NonFinite,
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    /// Row-major rotation.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<RawTransform> for RigidTransform {
    type Error = TransformError;

    fn try_from(raw: RawTransform) -> Result<Self, Self::Error> {
        let r = raw.rotation;
        let m = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        RigidTransform::new(m, Vector3::from(raw.translation))
    }
}

impl From<RigidTransform> for RawTransform {
    fn from(t: RigidTransform) -> Self {
        let m = t.rotation;
        Self {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: t.translation.into(),
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, TransformError> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(TransformError::NonFinite);
        }
        let dev = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if dev > ORTHO_TOL {
            return Err(TransformError::NotOrthonormal(dev));
        }
        let det = rotation.determinant();
        if det < 0.0 {
            return Err(TransformError::Reflection(det));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation applying `rx` about X first, then `ry` about Y, then `rz`
    /// about Z (radians), i.e. `R = Rz * Ry * Rx`.
    pub fn from_euler_xyz(rx: f64, ry: f64, rz: f64, translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), rz)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), ry)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), rx);
        Self {
            rotation: r.into_inner(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Map every point through `t`; colors are carried along unchanged.
pub fn apply_rigid_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    let points = crate::par::map_slice(cloud.points(), |p| t.apply(p));
    PointCloud::from_parts_unchecked(points, cloud.colors().map(<[_]>::to_vec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(raw: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(raw.iter().map(|&p| Point3::from(p)).collect()).unwrap()
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let c = pts(&[[1.0, 2.0, 3.0], [-4.0, 0.5, 9.0]]);
        assert_eq!(apply_rigid_transform(&c, &RigidTransform::identity()), c);
    }

    #[test]
    fn translation_moves_origin() {
        let c = pts(&[[0.0; 3]]);
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(apply_rigid_transform(&c, &t).points()[0], Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn rejects_reflection_and_shear() {
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(refl, Vector3::zeros()),
            Err(TransformError::Reflection(_))
        ));
        let mut shear = Matrix3::identity();
        shear[(0, 1)] = 0.1;
        assert!(matches!(
            RigidTransform::new(shear, Vector3::zeros()),
            Err(TransformError::NotOrthonormal(_))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let t = RigidTransform::from_euler_xyz(0.1, -0.2, 0.3, Vector3::new(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&t).unwrap();
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn inverse_undoes_transform(
            rx in -3.1f64..3.1, ry in -3.1f64..3.1, rz in -3.1f64..3.1,
            tx in -10.0f64..10.0, ty in -10.0f64..10.0, tz in -10.0f64..10.0,
            raw in proptest::collection::vec(proptest::array::uniform3(-50.0f64..50.0), 1..40),
        ) {
            let t = RigidTransform::from_euler_xyz(rx, ry, rz, Vector3::new(tx, ty, tz));
            prop_assert!(RigidTransform::new(*t.rotation(), *t.translation()).is_ok());
            let c = pts(&raw);
            let back = apply_rigid_transform(&apply_rigid_transform(&c, &t), &t.inverse());
            for (a, b) in c.points().iter().zip(back.points()) {
                prop_assert!((a - b).norm() <= 1e-9);
            }
            let composed = t.compose(&t.inverse());
            prop_assert!((composed.rotation() - Matrix3::identity()).amax() < 1e-12);
        }

        #[test]
        fn pairwise_distances_preserved(
            rx in -3.1f64..3.1, ry in -3.1f64..3.1, rz in -3.1f64..3.1,
            raw in proptest::collection::vec(proptest::array::uniform3(-50.0f64..50.0), 2..20),
        ) {
            let t = RigidTransform::from_euler_xyz(rx, ry, rz, Vector3::new(3.0, -1.0, 7.0));
            let c = pts(&raw);
            let m = apply_rigid_transform(&c, &t);
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    let d0 = (c.points()[i] - c.points()[j]).norm();
                    let d1 = (m.points()[i] - m.points()[j]).norm();
                    prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
                }
            }
        }
    }
}
