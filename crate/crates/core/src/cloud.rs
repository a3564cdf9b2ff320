//! In-memory point cloud model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];
pub type Rgb = [u8; 3];

#[inline]
pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Squared Euclidean distance. Every neighbor computation in the crate goes
/// through this function so index queries and brute-force scans agree bitwise.
#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// A point set with optional per-point colors and normals.
///
/// Positions are always stored as `f64`, whatever numeric type the source
/// file used. `bit_depth` is the geometry precision used for PSNR peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3>,
    colors: Option<Vec<Rgb>>,
    normals: Option<Vec<Point3>>,
    bit_depth: u32,
}

impl PointCloud {
    /// Builds a cloud and infers `bit_depth` from the largest coordinate.
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud("non-finite coordinate".into()));
        }
        let bit_depth = infer_bit_depth(&positions);
        Ok(Self {
            positions,
            colors: None,
            normals: None,
            bit_depth,
        })
    }

    pub fn with_colors(mut self, colors: Vec<Rgb>) -> Result<Self> {
        if colors.len() != self.positions.len() {
            return Err(Error::InvalidCloud(format!(
                "{} colors for {} positions",
                colors.len(),
                self.positions.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    /// Attaches normals, normalizing each to unit length. Zero-length
    /// normals are replaced by +z.
    pub fn with_normals(mut self, normals: Vec<Point3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::InvalidCloud(format!(
                "{} normals for {} positions",
                normals.len(),
                self.positions.len()
            )));
        }
        let normals = normals.into_iter().map(normalize_or_z).collect();
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_bit_depth(mut self, bit_depth: u32) -> Result<Self> {
        if !(1..=32).contains(&bit_depth) {
            return Err(Error::InvalidCloud(format!(
                "bit depth {bit_depth} outside [1, 32]"
            )));
        }
        self.bit_depth = bit_depth;
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn normals(&self) -> Option<&[Point3]> {
        self.normals.as_deref()
    }

    pub fn bit_depth(&self) -> u32 {
        self.bit_depth
    }

    /// Geometry PSNR peak, `2^bit_depth - 1`.
    pub fn peak(&self) -> f64 {
        ((1u64 << self.bit_depth) - 1) as f64
    }

    pub fn require_colors(&self) -> Result<&[Rgb]> {
        self.colors().ok_or(Error::MissingAttribute("colors"))
    }

    /// Checks that every coordinate lies on the `[0, 2^bit_depth - 1]` grid range.
    pub fn is_within_voxel_grid(&self) -> bool {
        let peak = self.peak();
        self.positions
            .iter()
            .flatten()
            .all(|&c| (0.0..=peak).contains(&c))
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of(&self.positions).expect("cloud is never empty")
    }
}

fn normalize_or_z(n: Point3) -> Point3 {
    let len = dot(&n, &n).sqrt();
    if len > 0.0 && len.is_finite() {
        [n[0] / len, n[1] / len, n[2] / len]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// `ceil(log2(max_coordinate + 1))`, clamped to `[1, 32]`.
pub fn infer_bit_depth(positions: &[Point3]) -> u32 {
    let max = positions
        .iter()
        .flatten()
        .fold(0.0f64, |m, &c| m.max(c.abs()));
    let bits = (max + 1.0).log2().ceil();
    if bits.is_finite() {
        (bits as u32).clamp(1, 32)
    } else {
        32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_corner: Point3,
    pub max_corner: Point3,
}

impl BoundingBox {
    pub fn of(positions: &[Point3]) -> Result<Self> {
        let first = *positions.first().ok_or(Error::EmptyCloud)?;
        let (min_corner, max_corner) =
            positions
                .iter()
                .fold((first, first), |(mut lo, mut hi), p| {
                    for k in 0..3 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                    (lo, hi)
                });
        Ok(Self {
            min_corner,
            max_corner,
        })
    }

    pub fn centroid(&self) -> Point3 {
        [
            (self.min_corner[0] + self.max_corner[0]) / 2.0,
            (self.min_corner[1] + self.max_corner[1]) / 2.0,
            (self.min_corner[2] + self.max_corner[2]) / 2.0,
        ]
    }

    pub fn diagonal(&self) -> f64 {
        dist2(&self.min_corner, &self.max_corner).sqrt()
    }
}

/// Componentwise bounding box of a cloud.
pub fn bounding_box(cloud: &PointCloud) -> BoundingBox {
    cloud.bounding_box()
}
