//! Point-to-point (D1), point-to-plane (D2) and color (YUV) PSNR.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{dot, sub, PointCloud};
use crate::color::{rgb_to_ycbcr, YCbCr, YcbcrMatrix};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::normals::estimate_normals;

/// Geometry PSNR uses `3 * peak²` in the numerator, color PSNR `peak²`.
pub const GEOMETRY_PEAK_FACTOR: f64 = 3.0;
pub const COLOR_PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YuvSymmetry {
    /// Per channel, the larger of the two directional MSEs (lower PSNR).
    #[default]
    MaxMse,
    /// Per channel, the larger of the two directional PSNRs.
    MaxPsnr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsnrConfig {
    /// Value substituted for infinite PSNR wherever a finite number is needed.
    pub cap_db: f64,
    pub ycbcr: YcbcrMatrix,
    pub yuv_symmetry: YuvSymmetry,
}

impl Default for PsnrConfig {
    fn default() -> Self {
        Self {
            cap_db: 100.0,
            ycbcr: YcbcrMatrix::Bt709,
            yuv_symmetry: YuvSymmetry::MaxMse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsnrResult {
    pub mse_forward: f64,
    pub mse_backward: f64,
    pub mse_symmetric: f64,
    #[serde(with = "crate::serde_inf")]
    pub psnr_db: f64,
    pub peak: f64,
}

impl PsnrResult {
    fn new(mse_forward: f64, mse_backward: f64, mse_symmetric: f64, peak: f64, factor: f64) -> Self {
        Self {
            mse_forward,
            mse_backward,
            mse_symmetric,
            psnr_db: psnr_db(factor, peak, mse_symmetric),
            peak,
        }
    }

    pub fn capped(&self, cap_db: f64) -> f64 {
        self.psnr_db.min(cap_db)
    }
}

/// `10 log10(factor * peak² / mse)`, `+inf` when `mse == 0`.
pub fn psnr_db(factor: f64, peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (factor * peak * peak / mse).log10()
    }
}

fn mean(values: Vec<f64>) -> f64 {
    let n = values.len() as f64;
    values.iter().sum::<f64>() / n
}

/// Mean squared nearest-neighbor distance from every point of `from` to `to`.
fn directional_d1(from: &PointCloud, to: &SpatialIndex) -> f64 {
    mean(from.positions().par_iter().map(|p| to.nearest(p).1).collect())
}

/// Point-to-point geometry PSNR with the symmetric (max MSE) convention.
pub fn compute_d1(reference: &PointCloud, distorted: &PointCloud, peak: f64) -> Result<PsnrResult> {
    let ref_index = SpatialIndex::build(reference)?;
    let dist_index = SpatialIndex::build(distorted)?;
    let forward = directional_d1(distorted, &ref_index);
    let backward = directional_d1(reference, &dist_index);
    Ok(PsnrResult::new(
        forward,
        backward,
        forward.max(backward),
        peak,
        GEOMETRY_PEAK_FACTOR,
    ))
}

/// Mean squared projection of the error vector onto the normal of the
/// nearest neighbor in `to`.
fn directional_d2(from: &PointCloud, to: &PointCloud, to_index: &SpatialIndex) -> f64 {
    let normals = to.normals().expect("normals attached before use");
    let targets = to.positions();
    mean(
        from.positions()
            .par_iter()
            .map(|p| {
                let (j, _) = to_index.nearest(p);
                let e = dot(&sub(p, &targets[j]), &normals[j]);
                e * e
            })
            .collect(),
    )
}

fn with_normals(cloud: &PointCloud, radius: f64) -> Result<PointCloud> {
    if cloud.normals().is_some() {
        return Ok(cloud.clone());
    }
    estimate_normals(cloud, radius)
        .map(|est| est.cloud)
        .map_err(|e| Error::MissingNormalsUnrecoverable(e.to_string()))
}

/// Point-to-plane geometry PSNR. Clouds without normals get them estimated
/// with `normal_radius`; the forward pass projects on reference normals and
/// the backward pass on distorted normals.
pub fn compute_d2(
    reference: &PointCloud,
    distorted: &PointCloud,
    peak: f64,
    normal_radius: f64,
) -> Result<PsnrResult> {
    let reference = with_normals(reference, normal_radius)?;
    let distorted = with_normals(distorted, normal_radius)?;
    let ref_index = SpatialIndex::build(&reference)?;
    let dist_index = SpatialIndex::build(&distorted)?;
    let forward = directional_d2(&distorted, &reference, &ref_index);
    let backward = directional_d2(&reference, &distorted, &dist_index);
    Ok(PsnrResult::new(
        forward,
        backward,
        forward.max(backward),
        peak,
        GEOMETRY_PEAK_FACTOR,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YuvResult {
    pub psnr_y: PsnrResult,
    pub psnr_u: PsnrResult,
    pub psnr_v: PsnrResult,
    /// `(6 Y + U + V) / 8` over capped channel values.
    pub psnr_combined: f64,
}

/// Per-channel MSE of YCbCr differences against nearest neighbors.
fn directional_yuv(from: &PointCloud, from_ycc: &[YCbCr], to_index: &SpatialIndex, to_ycc: &[YCbCr]) -> [f64; 3] {
    let errs: Vec<[f64; 3]> = from
        .positions()
        .par_iter()
        .zip(from_ycc.par_iter())
        .map(|(p, a)| {
            let b = &to_ycc[to_index.nearest(p).0];
            [(a.y - b.y).powi(2), (a.cb - b.cb).powi(2), (a.cr - b.cr).powi(2)]
        })
        .collect();
    let n = errs.len() as f64;
    let mut sum = [0.0; 3];
    for e in &errs {
        for k in 0..3 {
            sum[k] += e[k];
        }
    }
    sum.map(|s| s / n)
}

pub fn compute_yuv(reference: &PointCloud, distorted: &PointCloud, config: &PsnrConfig) -> Result<YuvResult> {
    let ref_ycc: Vec<YCbCr> = reference
        .require_colors()?
        .iter()
        .map(|&c| rgb_to_ycbcr(c, config.ycbcr))
        .collect();
    let dist_ycc: Vec<YCbCr> = distorted
        .require_colors()?
        .iter()
        .map(|&c| rgb_to_ycbcr(c, config.ycbcr))
        .collect();
    let ref_index = SpatialIndex::build(reference)?;
    let dist_index = SpatialIndex::build(distorted)?;
    let forward = directional_yuv(distorted, &dist_ycc, &ref_index, &ref_ycc);
    let backward = directional_yuv(reference, &ref_ycc, &dist_index, &dist_ycc);
    let channel = |k: usize| {
        let symmetric = match config.yuv_symmetry {
            YuvSymmetry::MaxMse => forward[k].max(backward[k]),
            YuvSymmetry::MaxPsnr => forward[k].min(backward[k]),
        };
        PsnrResult::new(forward[k], backward[k], symmetric, COLOR_PEAK, 1.0)
    };
    let (y, u, v) = (channel(0), channel(1), channel(2));
    let cap = config.cap_db;
    Ok(YuvResult {
        psnr_y: y,
        psnr_u: u,
        psnr_v: v,
        psnr_combined: (6.0 * y.capped(cap) + u.capped(cap) + v.capped(cap)) / 8.0,
    })
}
