//! Point-cloud metrology for upright cylinders.
//!
//! * [`cloud`]: point clouds, PLY exchange, cropping, rigid transforms.
//! * [`synth`]: ground-truth scenes, dense surface sampling and simulated
//!   multi-frame range scanning with pose error.
//! * [`fitting`]: RANSAC/Taubin circles, direct ellipses, multi-slice
//!   cylinders.
//! * [`metrics`]: radial noise statistics, diameter error, PSNR and SSIM.
//!
//! Heavy loops run on rayon when the default `parallel` feature is enabled.
//! All randomness is derived from explicit seeds (see [`seed`]) so results are
//! bit-identical with or without the feature and for any thread count.

pub mod cloud;
pub mod fitting;
pub mod geom;
pub mod metrics;
pub mod par;
pub mod seed;
pub mod synth;

pub use cloud::{Aabb, Point3, PointCloud, RigidTransform};
