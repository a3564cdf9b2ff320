//! Per-point normal estimation by local quadric fitting.

use rayon::prelude::*;

use crate::cloud::{dot, sub, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::surface::fit_surface_iter;

pub const DEFAULT_NORMAL_RADIUS: f64 = 20.0;

const FALLBACK_NORMAL: Point3 = [0.0, 0.0, 1.0];

#[derive(Debug, Clone)]
pub struct NormalEstimation {
    /// Input cloud with normals attached.
    pub cloud: PointCloud,
    /// Points whose neighborhood was collinear (or too small); they carry +z.
    pub degenerate: Vec<usize>,
}

/// Estimates normals from the radius-`radius` neighborhood of every point.
///
/// Normals are oriented away from the bounding-box centroid; when the normal
/// is perpendicular to that direction its first non-zero component is made
/// positive.
pub fn estimate_normals(cloud: &PointCloud, radius: f64) -> Result<NormalEstimation> {
    if cloud.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: cloud.len(),
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let centroid = cloud.bounding_box().centroid();
    let positions = cloud.positions();
    let estimates: Vec<Option<Point3>> = positions
        .par_iter()
        .map(|p| {
            let nb = index.radius(p, radius);
            let fit = fit_surface_iter(nb.indices.iter().map(|&i| &positions[i]));
            fit.normal_near(p).map(|n| orient(n, &sub(p, &centroid)))
        })
        .collect();
    let degenerate = estimates
        .iter()
        .enumerate()
        .filter_map(|(i, n)| n.is_none().then_some(i))
        .collect::<Vec<_>>();
    if !degenerate.is_empty() {
        log::warn!(
            "{} of {} points had degenerate neighborhoods; using fallback normal",
            degenerate.len(),
            cloud.len()
        );
    }
    let normals = estimates
        .into_iter()
        .map(|n| n.unwrap_or(FALLBACK_NORMAL))
        .collect();
    Ok(NormalEstimation {
        cloud: cloud.clone().with_normals(normals)?,
        degenerate,
    })
}

fn orient(n: Point3, outward: &Point3) -> Point3 {
    let d = dot(&n, outward);
    let flip = if d != 0.0 {
        d < 0.0
    } else {
        n.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
    };
    if flip {
        [-n[0], -n[1], -n[2]]
    } else {
        n
    }
}
