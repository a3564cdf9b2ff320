//! PCQM: curvature and perceptual-color local features.
//!
//! For every reference point `p` a correspondent `p̂` is found by fitting a
//! quadric to the distorted points within radius `h` and projecting `p` on
//! it; `p̂` takes the curvature of that quadric and the color of its nearest
//! distorted point. Building the same correspondence of the reference against
//! itself gives the reference-side values. Features compare Gaussian-weighted
//! statistics of both sides over the radius-`h` reference neighborhood of
//! `p`, then average over all reference points.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::color::{rgb_to_perceptual, Lab2000HlTable, PerceptualColor, PerceptualMode};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::surface::{fit_surface_iter, SurfaceFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSide {
    /// Quadric fitted to the distorted neighbors of each reference point.
    #[default]
    Distorted,
    /// Quadric fitted to the reference neighbors instead.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcqmConfig {
    /// Neighborhood radius; `None` means `radius_factor` × reference bbox diagonal.
    pub radius: Option<f64>,
    pub radius_factor: f64,
    /// `k1..k8`.
    pub constants: [f64; 8],
    pub color_space: PerceptualMode,
    pub lab2000hl_table: Option<PathBuf>,
    pub fit_on: FitSide,
    /// Aggregate weights keyed `f1`..`f8`.
    pub weights: BTreeMap<String, f64>,
}

impl Default for PcqmConfig {
    fn default() -> Self {
        Self {
            radius: None,
            radius_factor: 0.02,
            constants: [1e-8, 1e-8, 1e-8, 0.01, 1e-8, 1e-8, 0.01, 0.01],
            color_space: PerceptualMode::Cielab,
            lab2000hl_table: None,
            fit_on: FitSide::Distorted,
            weights: default_weights(),
        }
    }
}

pub fn default_weights() -> BTreeMap<String, f64> {
    [("f3", 0.18), ("f4", 0.44), ("f6", 0.38)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

impl PcqmConfig {
    pub fn radius_for(&self, reference: &PointCloud) -> f64 {
        self.radius
            .unwrap_or_else(|| self.radius_factor * reference.bounding_box().diagonal())
    }

    pub fn converter(&self) -> Result<PerceptualConverter> {
        let table = match (&self.color_space, &self.lab2000hl_table) {
            (PerceptualMode::Lab2000hl, Some(path)) => Some(Lab2000HlTable::load(path)?),
            (PerceptualMode::Lab2000hl, None) => return Err(Error::TableMissing),
            _ => None,
        };
        Ok(PerceptualConverter {
            mode: self.color_space,
            table,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct PerceptualConverter {
    pub mode: PerceptualMode,
    pub table: Option<Lab2000HlTable>,
}

impl PerceptualConverter {
    fn convert_all(&self, cloud: &PointCloud) -> Result<Vec<PerceptualColor>> {
        cloud
            .require_colors()?
            .iter()
            .map(|&c| rgb_to_perceptual(c, self.mode, self.table.as_ref()))
            .collect()
    }
}

/// Correspondent of one reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrespondedPoint {
    pub fit: SurfaceFit,
    pub projected: Point3,
    /// Absolute mean curvature at the projection.
    pub curvature: f64,
    pub color: PerceptualColor,
    /// Fewer than six fitting points; curvature taken as zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct Correspondence<'a> {
    pub reference: &'a PointCloud,
    pub radius: f64,
    pub points: Vec<CorrespondedPoint>,
}

impl Correspondence<'_> {
    pub fn degenerate_count(&self) -> usize {
        self.points.iter().filter(|p| p.degenerate).count()
    }
}

pub fn build_correspondence<'a>(
    reference: &'a PointCloud,
    distorted: &PointCloud,
    radius: f64,
    fit_on: FitSide,
    converter: &PerceptualConverter,
) -> Result<Correspondence<'a>> {
    reference.require_colors()?;
    let dist_colors = converter.convert_all(distorted)?;
    let dist_index = SpatialIndex::build(distorted)?;
    let ref_index = SpatialIndex::build(reference)?;
    let (fit_cloud, fit_index) = match fit_on {
        FitSide::Distorted => (distorted, &dist_index),
        FitSide::Reference => (reference, &ref_index),
    };
    let fit_positions = fit_cloud.positions();
    let points = reference
        .positions()
        .par_iter()
        .map(|p| {
            let nb = fit_index.radius(p, radius);
            let fit = fit_surface_iter(nb.indices.iter().map(|&i| &fit_positions[i]));
            let degenerate = !matches!(fit, SurfaceFit::Quadric(_));
            let projected = match fit {
                SurfaceFit::Degenerate => fit_positions[fit_index.nearest(p).0],
                _ => fit.project(p),
            };
            let curvature = fit.curvature_near(p);
            let color = dist_colors[dist_index.nearest(&projected).0];
            CorrespondedPoint {
                fit,
                projected,
                curvature,
                color,
                degenerate,
            }
        })
        .collect();
    Ok(Correspondence {
        reference,
        radius,
        points,
    })
}

/// Gaussian-weighted mean and variance of two paired samples plus their covariance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairedStats {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

impl PairedStats {
    pub fn weighted(weights: &[f64], x: &[f64], y: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let wmean = |v: &[f64]| weights.iter().zip(v).map(|(w, v)| w * v).sum::<f64>() / total;
        let (mx, my) = (wmean(x), wmean(y));
        let wcov = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
            weights
                .iter()
                .zip(a.iter().zip(b))
                .map(|(w, (a, b))| w * (a - ma) * (b - mb))
                .sum::<f64>()
                / total
        };
        Self {
            mean_x: mx,
            mean_y: my,
            var_x: wcov(x, mx, x, mx),
            var_y: wcov(y, my, y, my),
            cov: wcov(x, mx, y, my),
        }
    }

    /// `σx σy`, computed as `sqrt(var_x var_y)` so identical samples give `var` exactly.
    fn sigma_product(&self) -> f64 {
        (self.var_x * self.var_y).sqrt()
    }
}

/// Local statistics feeding the eight per-point features.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalStats {
    pub curvature: PairedStats,
    pub lightness: PairedStats,
    pub chroma: PairedStats,
    /// Weighted mean of the per-sample hue difference ΔH.
    pub mean_hue_difference: f64,
}

/// `f1..f8` at one point from its local statistics.
pub fn point_features(s: &LocalStats, k: &[f64; 8]) -> [f64; 8] {
    let rho = &s.curvature;
    let l = &s.lightness;
    let c = &s.chroma;
    let (sd_rx, sd_ry) = (rho.var_x.sqrt(), rho.var_y.sqrt());
    let rho_sp = rho.sigma_product();
    let l_sp = l.sigma_product();
    [
        (rho.mean_x - rho.mean_y).abs() / (rho.mean_x.max(rho.mean_y) + k[0]),
        (sd_rx - sd_ry).abs() / (sd_rx.max(sd_ry) + k[1]),
        ((rho_sp - rho.cov).abs() / (rho_sp + k[2])).min(1.0),
        1.0 / (k[3] * (l.mean_x - l.mean_y).powi(2) + 1.0),
        (2.0 * l_sp + k[4]) / (l.var_x + l.var_y + k[4]),
        ((l.cov + k[5]) / (l_sp + k[5])).clamp(0.0, 1.0),
        1.0 / (k[6] * (c.mean_x - c.mean_y).powi(2) + 1.0),
        1.0 / (k[7] * s.mean_hue_difference.powi(2) + 1.0),
    ]
}

/// Global features `f1..f8` (average-pooled over reference points).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcqmFeatures {
    pub f: [f64; 8],
}

impl PcqmFeatures {
    pub fn get(&self, name: &str) -> Result<f64> {
        feature_slot(name)
            .map(|i| self.f[i])
            .ok_or_else(|| Error::UnknownFeatureName(name.to_string()))
    }
}

fn feature_slot(name: &str) -> Option<usize> {
    let n = name.strip_prefix("pcqm_").unwrap_or(name);
    let i: usize = n.strip_prefix('f')?.parse().ok()?;
    (1..=8).contains(&i).then(|| i - 1)
}

pub fn compute_pcqm_features(
    corr_ref: &Correspondence,
    corr_dist: &Correspondence,
    constants: &[f64; 8],
) -> Result<PcqmFeatures> {
    if corr_ref.radius != corr_dist.radius
        || !std::ptr::eq(corr_ref.reference, corr_dist.reference)
        || corr_ref.points.len() != corr_dist.points.len()
    {
        return Err(Error::SettingsMismatch(
            "correspondences differ in radius or reference cloud".into(),
        ));
    }
    let per_point = per_point_features(corr_ref, corr_dist, constants)?;
    let n = per_point.len() as f64;
    let mut f = [0.0; 8];
    for values in &per_point {
        for k in 0..8 {
            f[k] += values[k];
        }
    }
    Ok(PcqmFeatures { f: f.map(|s| s / n) })
}

/// Per-reference-point feature values, in reference order.
pub fn per_point_features(
    corr_ref: &Correspondence,
    corr_dist: &Correspondence,
    constants: &[f64; 8],
) -> Result<Vec<[f64; 8]>> {
    let reference = corr_ref.reference;
    let index = SpatialIndex::build(reference)?;
    let h = corr_ref.radius;
    let sigma = h / 3.0;
    let denom = 2.0 * sigma * sigma;
    Ok(reference
        .positions()
        .par_iter()
        .map(|p| {
            let nb = index.radius(p, h);
            let weights: Vec<f64> = nb
                .distances
                .iter()
                .map(|d| if denom > 0.0 { (-d * d / denom).exp() } else { 1.0 })
                .collect();
            let gather = |side: &Correspondence, f: fn(&CorrespondedPoint) -> f64| -> Vec<f64> {
                nb.indices.iter().map(|&j| f(&side.points[j])).collect()
            };
            let pair = |f: fn(&CorrespondedPoint) -> f64| {
                PairedStats::weighted(&weights, &gather(corr_ref, f), &gather(corr_dist, f))
            };
            let hue: Vec<f64> = nb
                .indices
                .iter()
                .map(|&j| {
                    let (a, b) = (&corr_ref.points[j].color, &corr_dist.points[j].color);
                    ((a.a - b.a).powi(2) + (a.b - b.b).powi(2) + (a.c - b.c).powi(2)).sqrt()
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let stats = LocalStats {
                curvature: pair(|c| c.curvature),
                lightness: pair(|c| c.color.l),
                chroma: pair(|c| c.color.c),
                mean_hue_difference: weights.iter().zip(&hue).map(|(w, h)| w * h).sum::<f64>() / total,
            };
            point_features(&stats, constants)
        })
        .collect())
}

/// Weighted sum of oriented features: `f1..f3` enter as-is and `f4..f8` as
/// `1 - f`, so identical clouds score 0 and larger means worse.
pub fn pcqm_aggregate(features: &PcqmFeatures, weights: &BTreeMap<String, f64>) -> Result<f64> {
    weights.iter().try_fold(0.0, |acc, (name, w)| {
        let slot = feature_slot(name).ok_or_else(|| Error::UnknownFeatureName(name.clone()))?;
        let v = features.f[slot];
        Ok(acc + w * if slot < 3 { v } else { 1.0 - v })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcqmResult {
    pub features: PcqmFeatures,
    pub aggregate: f64,
    pub radius: f64,
    pub color_space: PerceptualMode,
    pub degenerate_points: usize,
}

pub fn compute_pcqm(reference: &PointCloud, distorted: &PointCloud, config: &PcqmConfig) -> Result<PcqmResult> {
    let converter = config.converter()?;
    compute_pcqm_with(reference, distorted, config, &converter)
}

pub fn compute_pcqm_with(
    reference: &PointCloud,
    distorted: &PointCloud,
    config: &PcqmConfig,
    converter: &PerceptualConverter,
) -> Result<PcqmResult> {
    distorted.require_colors()?;
    let h = config.radius_for(reference);
    let corr_ref = build_correspondence(reference, reference, h, config.fit_on, converter)?;
    let corr_dist = build_correspondence(reference, distorted, h, config.fit_on, converter)?;
    let features = compute_pcqm_features(&corr_ref, &corr_dist, &config.constants)?;
    Ok(PcqmResult {
        aggregate: pcqm_aggregate(&features, &config.weights)?,
        features,
        radius: h,
        color_space: converter.mode,
        degenerate_points: corr_dist.degenerate_count(),
    })
}
