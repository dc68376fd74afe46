//! Point-cloud data model: points, optional colors, cropping and summary
//! statistics. PLY exchange lives in [`ply`], rigid motions in [`transform`].

pub mod ply;
pub mod transform;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use transform::RigidTransform;

/// A 3D position in meters.
pub type Point3 = nalgebra::Point3<f64>;

/// 8-bit RGB triplet.
pub type Rgb = [u8; 3];

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("color count {colors} does not match point count {points}")]
    ColorCountMismatch { points: usize, colors: usize },
    #[error("invalid bounding box: min must not exceed max on any axis")]
    InvertedBox,
}

/// Ordered points with optional per-point color.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self, CloudError> {
        check_finite(&points)?;
        Ok(Self { points, colors: None })
    }

    pub fn with_colors(points: Vec<Point3>, colors: Vec<Rgb>) -> Result<Self, CloudError> {
        check_finite(&points)?;
        if colors.len() != points.len() {
            return Err(CloudError::ColorCountMismatch {
                points: points.len(),
                colors: colors.len(),
            });
        }
        Ok(Self {
            points,
            colors: Some(colors),
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    /// Keep the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Concatenate clouds. The result carries colors only if every part does.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud>) -> Self {
        let parts: Vec<&PointCloud> = parts.into_iter().collect();
        let all_colored = !parts.is_empty() && parts.iter().all(|p| p.colors.is_some());
        let mut points = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut colors = all_colored.then(Vec::new);
        for p in &parts {
            points.extend_from_slice(&p.points);
            if let (Some(dst), Some(src)) = (colors.as_mut(), p.colors.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        Self { points, colors }
    }

    pub(crate) fn from_parts_unchecked(points: Vec<Point3>, colors: Option<Vec<Rgb>>) -> Self {
        debug_assert!(colors.as_ref().is_none_or(|c| c.len() == points.len()));
        Self { points, colors }
    }
}

fn check_finite(points: &[Point3]) -> Result<(), CloudError> {
    match points
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        Some(index) => Err(CloudError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Axis-aligned box with inclusive faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self, CloudError> {
        if (0..3).any(|k| min[k] > max[k] || min[k].is_nan() || max[k].is_nan()) {
            return Err(CloudError::InvertedBox);
        }
        Ok(Self { min, max })
    }

    /// A box that contains every finite point.
    pub fn everything() -> Self {
        Self {
            min: [f64::MIN; 3],
            max: [f64::MAX; 3],
        }
    }

    pub fn min(&self) -> Point3 {
        Point3::from(self.min)
    }

    pub fn max(&self) -> Point3 {
        Point3::from(self.max)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    fn around(points: &[Point3]) -> Option<Self> {
        let first = points.first()?;
        let mut min = [first.x, first.y, first.z];
        let mut max = min;
        for p in points {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Self { min, max })
    }
}

impl<'de> Deserialize<'de> for Aabb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            min: [f64; 3],
            max: [f64; 3],
        }
        let raw = Raw::deserialize(d)?;
        Aabb::new(raw.min, raw.max).map_err(serde::de::Error::custom)
    }
}

/// Points inside `bbox` (inclusive on every face), order preserved.
pub fn crop_aabb(cloud: &PointCloud, bbox: &Aabb) -> PointCloud {
    let keep: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| bbox.contains(p).then_some(i))
        .collect();
    cloud.select(&keep)
}

/// Point counts before and after a crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropReport {
    pub before: usize,
    pub after: usize,
    /// `100 * (1 - after / before)`; zero when `before` is zero.
    pub percent_reduction: f64,
}

impl CropReport {
    pub fn new(before: usize, after: usize) -> Self {
        let percent_reduction = if before == 0 {
            0.0
        } else {
            100.0 * (1.0 - after as f64 / before as f64)
        };
        Self {
            before,
            after,
            percent_reduction,
        }
    }
}

impl fmt::Display for CropReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cropped {} -> {} points ({:.1}% reduction)",
            self.before, self.after, self.percent_reduction
        )
    }
}

/// Count, centroid and tight bounds of a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudStats {
    pub count: usize,
    /// Absent for an empty cloud.
    pub centroid: Option<[f64; 3]>,
    pub bounds: Option<Aabb>,
}

pub fn cloud_stats(cloud: &PointCloud) -> CloudStats {
    let n = cloud.len();
    let centroid = (n > 0).then(|| {
        let mut sum = [0.0f64; 3];
        for p in cloud.points() {
            sum[0] += p.x;
            sum[1] += p.y;
            sum[2] += p.z;
        }
        let nf = n as f64;
        let mut c = [sum[0] / nf, sum[1] / nf, sum[2] / nf];
        // Rounding can push the mean of identical coordinates past the bound.
        let bounds = Aabb::around(cloud.points()).expect("non-empty");
        for k in 0..3 {
            c[k] = c[k].clamp(bounds.min[k], bounds.max[k]);
        }
        c
    });
    CloudStats {
        count: n,
        centroid,
        bounds: Aabb::around(cloud.points()),
    }
}
