//! PointSSIM: similarity of local dispersion statistics.
//!
//! Every point gets a feature value from an estimator applied over the
//! attribute values of its k nearest neighbors (itself included). Each
//! distorted point is compared with its nearest reference point through the
//! relative difference `|F_X(q) - F_Y(p)| / (max(|F_X(q)|, |F_Y(p)|) + eps)`
//! and the differences are pooled as a mean of their `k`-th powers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::color::{rgb_to_ycbcr, YcbcrMatrix};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    /// Distances from a point to its neighbors.
    Geometry,
    /// Luma (Y of YCbCr) of the neighbors.
    Luminance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Population variance.
    #[default]
    Variance,
    Median,
    MeanAbsDev,
    MedianAbsDev,
    /// Coefficient of variation, `std / |mean|` (0 when the mean is 0).
    Cov,
    /// Quartile coefficient of dispersion, `(Q3 - Q1) / (Q3 + Q1)`.
    Qcd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSsimConfig {
    pub k_neighbors: usize,
    pub estimator: Estimator,
    pub pooling_exponent: f64,
    pub epsilon: f64,
    pub ycbcr: YcbcrMatrix,
}

impl Default for PointSsimConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 12,
            estimator: Estimator::Variance,
            pooling_exponent: 1.0,
            epsilon: 1e-9,
            ycbcr: YcbcrMatrix::Bt709,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionField {
    pub values: Vec<f64>,
    pub attribute: Attribute,
    pub estimator: Estimator,
    pub k_neighbors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSsimScore {
    pub score: f64,
    pub pooling_exponent: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl Estimator {
    /// Applies the estimator to a non-empty sample.
    pub fn apply(self, values: &mut [f64]) -> f64 {
        debug_assert!(!values.is_empty());
        match self {
            Estimator::Variance => {
                let m = mean(values);
                values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
            }
            Estimator::Median => {
                values.sort_by(f64::total_cmp);
                median_sorted(values)
            }
            Estimator::MeanAbsDev => {
                let m = mean(values);
                values.iter().map(|v| (v - m).abs()).sum::<f64>() / values.len() as f64
            }
            Estimator::MedianAbsDev => {
                values.sort_by(f64::total_cmp);
                let m = median_sorted(values);
                let mut dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
                dev.sort_by(f64::total_cmp);
                median_sorted(&dev)
            }
            Estimator::Cov => {
                let m = mean(values);
                if m == 0.0 {
                    return 0.0;
                }
                let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
                var.sqrt() / m.abs()
            }
            Estimator::Qcd => {
                values.sort_by(f64::total_cmp);
                let q1 = quantile_sorted(values, 0.25);
                let q3 = quantile_sorted(values, 0.75);
                if q1 + q3 == 0.0 {
                    0.0
                } else {
                    ((q3 - q1) / (q3 + q1)).abs()
                }
            }
        }
    }
}

/// Per-point dispersion of an attribute over each point's k-neighborhood.
pub fn extract_dispersion(
    cloud: &PointCloud,
    attribute: Attribute,
    estimator: Estimator,
    k_neighbors: usize,
    ycbcr: YcbcrMatrix,
) -> Result<DispersionField> {
    if k_neighbors == 0 {
        return Err(Error::Config("k_neighbors must be positive".into()));
    }
    let luma: Option<Vec<f64>> = match attribute {
        Attribute::Geometry => None,
        Attribute::Luminance => Some(
            cloud
                .require_colors()?
                .iter()
                .map(|&c| rgb_to_ycbcr(c, ycbcr).y)
                .collect(),
        ),
    };
    let index = SpatialIndex::build(cloud)?;
    let values = cloud
        .positions()
        .par_iter()
        .map(|p| {
            let nb = index.knn(p, k_neighbors);
            let mut sample = match &luma {
                None => nb.distances,
                Some(y) => nb.indices.iter().map(|&i| y[i]).collect(),
            };
            estimator.apply(&mut sample)
        })
        .collect();
    Ok(DispersionField {
        values,
        attribute,
        estimator,
        k_neighbors,
    })
}

/// Relative difference of two feature values.
pub fn relative_difference(fx: f64, fy: f64, epsilon: f64) -> f64 {
    (fx - fy).abs() / (fx.abs().max(fy.abs()) + epsilon)
}

/// Pools per-point relative differences between distorted points and their
/// nearest reference points.
pub fn pointssim_score(
    ref_field: &DispersionField,
    dist_field: &DispersionField,
    reference: &PointCloud,
    distorted: &PointCloud,
    pooling_exponent: f64,
    epsilon: f64,
) -> Result<PointSsimScore> {
    if ref_field.attribute != dist_field.attribute
        || ref_field.estimator != dist_field.estimator
        || ref_field.k_neighbors != dist_field.k_neighbors
    {
        return Err(Error::SettingsMismatch(
            "dispersion fields were computed with different settings".into(),
        ));
    }
    if ref_field.values.len() != reference.len() || dist_field.values.len() != distorted.len() {
        return Err(Error::SettingsMismatch(
            "dispersion field length does not match its cloud".into(),
        ));
    }
    let index = SpatialIndex::build(reference)?;
    let per_point: Vec<f64> = distorted
        .positions()
        .par_iter()
        .zip(dist_field.values.par_iter())
        .map(|(p, &fy)| {
            let q = index.nearest(p).0;
            relative_difference(ref_field.values[q], fy, epsilon).powf(pooling_exponent)
        })
        .collect();
    Ok(PointSsimScore {
        score: mean(&per_point),
        pooling_exponent,
    })
}

/// Extracts both fields and scores them.
pub fn pointssim(
    reference: &PointCloud,
    distorted: &PointCloud,
    attribute: Attribute,
    config: &PointSsimConfig,
) -> Result<PointSsimScore> {
    let field = |c: &PointCloud| {
        extract_dispersion(c, attribute, config.estimator, config.k_neighbors, config.ycbcr)
    };
    let rf = field(reference)?;
    let df = field(distorted)?;
    pointssim_score(&rf, &df, reference, distorted, config.pooling_exponent, config.epsilon)
}
