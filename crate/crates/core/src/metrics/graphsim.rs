//! GraphSIM and its multiscale extension.
//!
//! Keypoints are reference points with a large high-pass response on the
//! k-NN graph. Around each keypoint a local graph is built in both clouds
//! (radius query around the keypoint position), colors in the Gaussian color
//! model serve as the graph signal, and weighted color gradients towards the
//! center feed three similarity terms per channel. Scale `s` keeps every
//! `2^s`-th member of the distance-sorted neighborhood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, Point3, PointCloud};
use crate::color::{rgb_to_gaussian, GaussianColor, DEFAULT_GAUSSIAN_MATRIX};
use crate::error::{Error, Result};
use crate::index::{mean_nn_distance, SpatialIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSimConfig {
    /// Fraction λ of reference points kept as keypoints.
    pub keypoint_fraction: f64,
    /// Neighbors used for the high-pass response.
    pub k_graph: usize,
    /// Local graph radius; `None` means `radius_factor` × mean NN distance of the reference.
    pub radius: Option<f64>,
    pub radius_factor: f64,
    pub scales: usize,
    /// Per-scale weights; `None` means equal weights.
    pub scale_weights: Option<Vec<f64>>,
    pub smoothing: bool,
    /// `T0`, `T1`, `T2`.
    pub constants: [f64; 3],
    /// Channel pooling weights for `E`, `E_λ`, `E_λλ`.
    pub channel_weights: [f64; 3],
    pub gaussian_matrix: [[f64; 3]; 3],
}

impl Default for GraphSimConfig {
    fn default() -> Self {
        Self {
            keypoint_fraction: 0.1,
            k_graph: 10,
            radius: None,
            radius_factor: 2.0,
            scales: 3,
            scale_weights: None,
            smoothing: true,
            constants: [0.001; 3],
            channel_weights: [6.0, 1.0, 1.0],
            gaussian_matrix: DEFAULT_GAUSSIAN_MATRIX,
        }
    }
}

impl GraphSimConfig {
    fn weights(&self) -> Result<Vec<f64>> {
        let w = match &self.scale_weights {
            Some(w) if w.len() != self.scales => {
                return Err(Error::Config(format!(
                    "{} scale weights given for {} scales",
                    w.len(),
                    self.scales
                )))
            }
            Some(w) => w.clone(),
            None => vec![1.0; self.scales],
        };
        if self.scales == 0 || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("scale weights must have a positive sum".into()));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    /// Sorted by descending response, ties by ascending index.
    pub indices: Vec<usize>,
    /// Response of every reference point, in cloud order.
    pub responses: Vec<f64>,
    pub fraction: f64,
}

/// High-pass response `‖p − mean(kNN(p))‖` for every point.
pub fn highpass_responses(cloud: &PointCloud, k_graph: usize) -> Result<Vec<f64>> {
    let index = SpatialIndex::build(cloud)?;
    let k = k_graph.min(cloud.len() - 1);
    let pts = cloud.positions();
    Ok(pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if k == 0 {
                return 0.0;
            }
            let nb = index.knn(p, k + 1);
            let mut mean = [0.0; 3];
            for &j in nb.indices.iter().filter(|&&j| j != i).take(k) {
                for a in 0..3 {
                    mean[a] += pts[j][a];
                }
            }
            dist2(p, &mean.map(|m| m / k as f64)).sqrt()
        })
        .collect())
}

pub fn extract_keypoints(cloud: &PointCloud, fraction: f64, k_graph: usize) -> Result<KeypointSet> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("keypoint fraction {fraction} outside (0, 1]")));
    }
    let responses = highpass_responses(cloud, k_graph)?;
    let count = ((fraction * cloud.len() as f64).ceil() as usize).clamp(1, cloud.len());
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| responses[b].total_cmp(&responses[a]).then(a.cmp(&b)));
    order.truncate(count);
    Ok(KeypointSet {
        indices: order,
        responses,
        fraction,
    })
}

/// A keypoint-centered graph. Node 0 is the center, the remaining nodes are
/// the members sorted by distance to the keypoint position.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGraph {
    pub center: usize,
    pub members: Vec<usize>,
    pub positions: Vec<Point3>,
    pub signal: Vec<GaussianColor>,
}

impl LocalGraph {
    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Edge weights `exp(-d²/σ²)` from each member to the center, with σ the
    /// mean member distance.
    pub fn weights(&self) -> Vec<f64> {
        let d2: Vec<f64> = self.positions[1..]
            .iter()
            .map(|p| dist2(p, &self.positions[0]))
            .collect();
        let sigma2 = self.bandwidth().powi(2);
        d2.iter()
            .map(|d| if sigma2 > 0.0 { (-d / sigma2).exp() } else { 1.0 })
            .collect()
    }

    fn bandwidth(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        let c = &self.positions[0];
        self.positions[1..].iter().map(|p| dist2(p, c).sqrt()).sum::<f64>() / self.members.len() as f64
    }

    /// One low-pass step over all nodes: `f'(j) = Σ_i W_ji f(i) / Σ_i W_ji`.
    pub fn smoothed(&self) -> LocalGraph {
        let sigma2 = self.bandwidth().powi(2);
        let signal = self
            .positions
            .iter()
            .map(|pj| {
                let (mut acc, mut total) = ([0.0; 3], 0.0);
                for (pi, fi) in self.positions.iter().zip(&self.signal) {
                    let d = dist2(pj, pi);
                    let w = if sigma2 > 0.0 { (-d / sigma2).exp() } else { 1.0 };
                    total += w;
                    for c in 0..3 {
                        acc[c] += w * fi.channel(c);
                    }
                }
                GaussianColor {
                    e: acc[0] / total,
                    e_l: acc[1] / total,
                    e_ll: acc[2] / total,
                }
            })
            .collect();
        LocalGraph {
            signal,
            ..self.clone()
        }
    }

    /// Weighted gradients `sqrt(W_j) (f(j) - f(center))` of one channel.
    pub fn gradients(&self, channel: usize) -> Vec<f64> {
        let f0 = self.signal[0].channel(channel);
        self.weights()
            .iter()
            .zip(&self.signal[1..])
            .map(|(w, f)| w.sqrt() * (f.channel(channel) - f0))
            .collect()
    }
}

/// Builds the graph of `cloud` around `position`: the center is the point
/// nearest to `position`, members are the other points within `radius`.
pub fn build_local_graph(
    index: &SpatialIndex,
    colors: &[GaussianColor],
    position: &Point3,
    radius: f64,
) -> LocalGraph {
    let points = index.points();
    let center = index.nearest(position).0;
    let nb = index.radius(position, radius);
    let members: Vec<usize> = nb.indices.into_iter().filter(|&i| i != center).collect();
    let positions = std::iter::once(center).chain(members.iter().copied()).map(|i| points[i]).collect();
    let signal = std::iter::once(center).chain(members.iter().copied()).map(|i| colors[i]).collect();
    LocalGraph {
        center,
        members,
        positions,
        signal,
    }
}

/// Keeps every `2^s`-th member and contracts positions towards `anchor` by `2^s`.
pub fn scale_transform(graph: &LocalGraph, scale: usize, anchor: &Point3) -> LocalGraph {
    if scale == 0 {
        return graph.clone();
    }
    let step = 1usize << scale;
    let factor = step as f64;
    let keep: Vec<usize> = std::iter::once(0).chain((0..graph.members.len()).step_by(step).map(|m| m + 1)).collect();
    let contract = |p: &Point3| [0, 1, 2].map(|a| anchor[a] + (p[a] - anchor[a]) / factor);
    LocalGraph {
        center: graph.center,
        members: keep[1..].iter().map(|&n| graph.members[n - 1]).collect(),
        positions: keep.iter().map(|&n| contract(&graph.positions[n])).collect(),
        signal: keep.iter().map(|&n| graph.signal[n]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradientFeatures {
    pub m_g: f64,
    pub mu_g: f64,
    pub var_g: f64,
}

/// Features of gradients `sqrt(w_j) · diff_j`.
pub fn gradient_features(weights: &[f64], diffs: &[f64]) -> GradientFeatures {
    let g: Vec<f64> = weights.iter().zip(diffs).map(|(w, d)| w.sqrt() * d).collect();
    features_of(&g)
}

fn features_of(g: &[f64]) -> GradientFeatures {
    if g.is_empty() {
        return GradientFeatures::default();
    }
    let n = g.len() as f64;
    let m_g: f64 = g.iter().sum();
    let mu_g = m_g / n;
    GradientFeatures {
        m_g,
        mu_g,
        var_g: covariance(g, g),
    }
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n
}

/// Gradient features of `cloud` around `center`.
pub fn local_graph_features(
    cloud: &PointCloud,
    center: &Point3,
    radius: f64,
    channel: usize,
    smoothing: bool,
) -> Result<GradientFeatures> {
    let colors = gaussian_colors(cloud, &DEFAULT_GAUSSIAN_MATRIX)?;
    let index = SpatialIndex::build(cloud)?;
    let mut graph = build_local_graph(&index, &colors, center, radius);
    if graph.members.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    if smoothing {
        graph = graph.smoothed();
    }
    Ok(features_of(&graph.gradients(channel)))
}

pub fn sim_ratio(r: f64, d: f64, t: f64) -> f64 {
    (2.0 * r * d + t) / (r * r + d * d + t)
}

/// `SIM_cg` of two gradient sequences, paired member by member over the
/// shorter length; both deviations are taken over the same pairs.
pub fn sim_covariance(g_ref: &[f64], g_dist: &[f64], t: f64) -> f64 {
    let n = g_ref.len().min(g_dist.len());
    let (r, d) = (&g_ref[..n], &g_dist[..n]);
    let sigma_product = (covariance(r, r) * covariance(d, d)).sqrt();
    (covariance(r, d) + t) / (sigma_product + t)
}

/// `[SIM_mg, SIM_ug, SIM_cg]` for one channel.
pub fn channel_sims(g_ref: &[f64], g_dist: &[f64], t: &[f64; 3]) -> [f64; 3] {
    let (fr, fd) = (features_of(g_ref), features_of(g_dist));
    [
        sim_ratio(fr.m_g, fd.m_g, t[0]),
        sim_ratio(fr.mu_g, fd.mu_g, t[1]),
        sim_covariance(g_ref, g_dist, t[2]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleScore {
    pub scale: usize,
    /// Keypoint means of channel-pooled `|SIM|` for `m_g`, `μ_g`, `c_g`.
    pub sim_mg: f64,
    pub sim_ug: f64,
    pub sim_cg: f64,
    /// `channels[c]` = keypoint means of `|SIM_mg|`, `|SIM_ug|`, `|SIM_cg|` in channel `c`.
    pub channels: [[f64; 3]; 3],
    /// Keypoint mean of the channel-pooled `|SIM_mg · SIM_ug · SIM_cg|`.
    pub score: f64,
    pub keypoints_used: usize,
    pub ref_graphs_empty: usize,
    pub dist_graphs_empty: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSimScore {
    pub scales: Vec<ScaleScore>,
    pub scale_weights: Vec<f64>,
    pub overall: f64,
    pub keypoints: usize,
    pub radius: f64,
}

impl GraphSimScore {
    /// Single-scale GraphSIM, i.e. the scale-0 score.
    pub fn graphsim(&self) -> f64 {
        self.scales[0].score
    }
}

pub fn pool_scales(scores: &[f64], weights: &[f64]) -> f64 {
    scores.iter().zip(weights).map(|(s, w)| s * w).sum::<f64>() / weights.iter().sum::<f64>()
}

fn gaussian_colors(cloud: &PointCloud, matrix: &[[f64; 3]; 3]) -> Result<Vec<GaussianColor>> {
    Ok(cloud.require_colors()?.iter().map(|&c| rgb_to_gaussian(c, matrix)).collect())
}

/// Per-keypoint, per-scale outcome: `None` when the reference graph is empty.
struct KeypointResult {
    per_scale: Vec<Option<([[f64; 3]; 3], bool)>>,
}

pub fn msgraphsim_score(reference: &PointCloud, distorted: &PointCloud, config: &GraphSimConfig) -> Result<GraphSimScore> {
    let scale_weights = config.weights()?;
    let ref_colors = gaussian_colors(reference, &config.gaussian_matrix)?;
    let dist_colors = gaussian_colors(distorted, &config.gaussian_matrix)?;
    let keypoints = extract_keypoints(reference, config.keypoint_fraction, config.k_graph)?;
    let ref_index = SpatialIndex::build(reference)?;
    let dist_index = SpatialIndex::build(distorted)?;
    let radius = config
        .radius
        .unwrap_or_else(|| config.radius_factor * mean_nn_distance(&ref_index));
    let anchor = reference.bounding_box().centroid();
    let t = config.constants;

    let results: Vec<KeypointResult> = keypoints
        .indices
        .par_iter()
        .map(|&k| {
            let position = reference.positions()[k];
            let ref_graph = build_local_graph(&ref_index, &ref_colors, &position, radius);
            let dist_graph = build_local_graph(&dist_index, &dist_colors, &position, radius);
            let per_scale = (0..config.scales)
                .map(|s| {
                    let mut gr = scale_transform(&ref_graph, s, &anchor);
                    if gr.members.is_empty() {
                        return None;
                    }
                    let mut gd = scale_transform(&dist_graph, s, &anchor);
                    if config.smoothing {
                        gr = gr.smoothed();
                        gd = gd.smoothed();
                    }
                    let dist_empty = gd.members.is_empty();
                    let sims = [0, 1, 2].map(|c| channel_sims(&gr.gradients(c), &gd.gradients(c), &t));
                    Some((sims, dist_empty))
                })
                .collect();
            KeypointResult { per_scale }
        })
        .collect();

    let cw = config.channel_weights;
    let cw_total: f64 = cw.iter().sum();
    let mut scales = Vec::with_capacity(config.scales);
    for s in 0..config.scales {
        let mut channels = [[0.0; 3]; 3];
        let mut score = 0.0;
        let (mut used, mut ref_empty, mut dist_empty) = (0usize, 0usize, 0usize);
        for r in &results {
            let Some((sims, d_empty)) = &r.per_scale[s] else {
                ref_empty += 1;
                continue;
            };
            used += 1;
            dist_empty += usize::from(*d_empty);
            let mut pooled = 0.0;
            for c in 0..3 {
                for x in 0..3 {
                    channels[c][x] += sims[c][x].abs();
                }
                pooled += cw[c] * (sims[c][0] * sims[c][1] * sims[c][2]).abs();
            }
            score += pooled / cw_total;
        }
        if used == 0 {
            return Err(Error::AllKeypointsEmpty { scale: s });
        }
        let n = used as f64;
        let channels = channels.map(|row| row.map(|v| v / n));
        let pooled_feature = |x: usize| (0..3).map(|c| cw[c] * channels[c][x]).sum::<f64>() / cw_total;
        scales.push(ScaleScore {
            scale: s,
            sim_mg: pooled_feature(0),
            sim_ug: pooled_feature(1),
            sim_cg: pooled_feature(2),
            channels,
            score: score / n,
            keypoints_used: used,
            ref_graphs_empty: ref_empty,
            dist_graphs_empty: dist_empty,
        });
    }
    let overall = pool_scales(&scales.iter().map(|s| s.score).collect::<Vec<_>>(), &scale_weights);
    Ok(GraphSimScore {
        scales,
        scale_weights,
        overall,
        keypoints: keypoints.indices.len(),
        radius,
    })
}
