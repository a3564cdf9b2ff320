//! End-to-end stages shared by the command-line tool and the tests:
//! single-pair metrics, RFE on a feature table, prediction and group-wise
//! cross-validation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::evaluation::report::metric_stats;
use crate::evaluation::ScoreTable;
use crate::features::FeatureTable;
use crate::metrics::graphsim::msgraphsim_score;
use crate::metrics::pcqm::compute_pcqm;
use crate::metrics::pointssim::{pointssim, Attribute};
use crate::metrics::psnr::{compute_d1, compute_d2, compute_yuv, PsnrResult};
use crate::ply::load_ply_with_bit_depth;
use crate::regression::model::finite_rows;
use crate::regression::{group_kfold, model_registry, rfe_rank, FeatureRanking, FusionModel, RfeEstimator, Scaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    D1,
    D2,
    Yuv,
    Pointssim,
    Pcqm,
    Graphsim,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::D1,
        MetricKind::D2,
        MetricKind::Yuv,
        MetricKind::Pointssim,
        MetricKind::Pcqm,
        MetricKind::Graphsim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::D1 => "d1",
            MetricKind::D2 => "d2",
            MetricKind::Yuv => "yuv",
            MetricKind::Pointssim => "pointssim",
            MetricKind::Pcqm => "pcqm",
            MetricKind::Graphsim => "graphsim",
        }
    }

    /// Parses a comma-separated list; `all` expands to every metric.
    pub fn parse_list(text: &str) -> Result<Vec<MetricKind>> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if part == "all" {
                out.extend(Self::ALL);
                continue;
            }
            let kind = Self::ALL
                .into_iter()
                .find(|k| k.name() == part)
                .ok_or_else(|| Error::Config(format!("unknown metric `{part}` (expected all, d1, d2, yuv, pointssim, pcqm or graphsim)")))?;
            out.push(kind);
        }
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no metric selected".into()));
        }
        Ok(out)
    }
}

fn psnr_json(r: &PsnrResult, cap: f64) -> Value {
    let mut v = serde_json::to_value(r).expect("psnr serializes");
    v["psnr_capped_db"] = json!(r.capped(cap));
    v
}

/// Runs the selected metrics on one pair of PLY files and returns a JSON object.
pub fn pair_metrics(ref_path: &Path, dist_path: &Path, kinds: &[MetricKind], config: &Config) -> Result<Value> {
    let reference = load_ply_with_bit_depth(ref_path, config.bit_depth)?;
    let distorted = load_ply_with_bit_depth(dist_path, config.bit_depth)?;
    let cap = config.psnr.cap_db;
    let mut out = Map::new();
    out.insert("ref".into(), json!(ref_path.display().to_string()));
    out.insert("dist".into(), json!(dist_path.display().to_string()));
    out.insert("config_hash".into(), json!(config.hash()));
    out.insert("bit_depth".into(), json!(reference.bit_depth()));
    for &kind in kinds {
        let value = match kind {
            MetricKind::D1 => psnr_json(&compute_d1(&reference, &distorted, reference.peak())?, cap),
            MetricKind::D2 => psnr_json(
                &compute_d2(&reference, &distorted, reference.peak(), config.normals.radius)?,
                cap,
            ),
            MetricKind::Yuv => {
                let r = compute_yuv(&reference, &distorted, &config.psnr)?;
                let mut v = serde_json::to_value(r).expect("yuv serializes");
                for (key, p) in [("y", &r.psnr_y), ("u", &r.psnr_u), ("v", &r.psnr_v)] {
                    v[key] = psnr_json(p, cap);
                }
                v
            }
            MetricKind::Pointssim => json!({
                "luminance": pointssim(&reference, &distorted, Attribute::Luminance, &config.pointssim)?,
                "geometry": pointssim(&reference, &distorted, Attribute::Geometry, &config.pointssim)?,
            }),
            MetricKind::Pcqm => serde_json::to_value(compute_pcqm(&reference, &distorted, &config.pcqm)?)?,
            MetricKind::Graphsim => serde_json::to_value(msgraphsim_score(&reference, &distorted, &config.graphsim)?)?,
        };
        out.insert(kind.name().into(), value);
    }
    Ok(Value::Object(out))
}

/// Min-max scaled, capped columns `names` of `table`.
fn scaled_columns(table: &FeatureTable, names: &[String], cap: f64) -> Result<Vec<Vec<f64>>> {
    let raw = finite_rows(table.select(names)?, cap);
    Ok(Scaler::fit(&raw)?.transform(&raw))
}

/// RFE ranking over `names` (all table columns when empty).
pub fn rank_features(table: &FeatureTable, names: &[String], use_svr: bool, config: &Config) -> Result<FeatureRanking> {
    let names: Vec<String> = if names.is_empty() { table.names.clone() } else { names.to_vec() };
    let x = scaled_columns(table, &names, config.psnr.cap_db)?;
    let estimator = if use_svr {
        RfeEstimator::Svr {
            params: config.regression.svr.clone(),
            permutations: config.regression.permutations,
        }
    } else {
        RfeEstimator::Ridge {
            alpha: config.regression.alpha,
        }
    };
    rfe_rank(&x, &table.mos(), &names, &estimator, config.regression.rfe_step, config.seed)
}

/// Scores every row of `table` with `model`.
pub fn predict_table(model: &FusionModel, table: &FeatureTable, config: &Config, force: bool) -> Result<ScoreTable> {
    model.check_compatible(table, force)?;
    let scores = model.predict(table, config.psnr.cap_db)?;
    Ok(ScoreTable {
        keys: table.rows.iter().map(|r| (r.ref_name.clone(), r.dist_name.clone())).collect(),
        names: vec![model.name.clone()],
        columns: vec![scores],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_groups: Vec<String>,
    pub pcc: f64,
    pub srocc: f64,
    pub rmse: f64,
    pub or: f64,
}

/// Mean and population standard deviation across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub model: String,
    pub folds: usize,
    pub seed: u64,
    pub config_hash: String,
    pub per_fold: Vec<FoldStats>,
    pub pcc: Summary,
    pub srocc: Summary,
    pub rmse: Summary,
    pub or: Summary,
}

impl CrossValReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn text_table(&self) -> String {
        let mut out = format!("{:>4}  {:>5}  {:>7}  {:>7}  {:>7}  {:>7}\n", "Fold", "N", "PCC", "SROCC", "RMSE", "OR");
        for f in &self.per_fold {
            out.push_str(&format!(
                "{:>4}  {:>5}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7.3}\n",
                f.fold, f.test_rows, f.pcc, f.srocc, f.rmse, f.or
            ));
        }
        let row = |label: &str, pick: fn(&Summary) -> f64| {
            format!(
                "{label:>4}  {:>5}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7.3}\n",
                "",
                pick(&self.pcc),
                pick(&self.srocc),
                pick(&self.rmse),
                pick(&self.or)
            )
        };
        out.push_str(&row("mean", |s| s.mean));
        out.push_str(&row("std", |s| s.std));
        out
    }
}

/// Group k-fold cross-validation of a registry model. Each fold refits the
/// scaler and regressor on its training rows and evaluates the held-out
/// predictions after a logistic fit, on MOS normalized over the whole table.
pub fn cross_validate(table: &FeatureTable, model: &str, folds: usize, config: &Config) -> Result<CrossValReport> {
    model_registry(model)?;
    let splits = group_kfold(&table.groups(), folds, config.seed)?;
    let mos = table.mos();
    let (lo, hi) = match config.evaluation.mos_range {
        Some([lo, hi]) => (lo, hi),
        None => mos
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v))),
    };
    let span = if config.evaluation.normalize_mos && hi > lo { hi - lo } else { 1.0 };
    let offset = if config.evaluation.normalize_mos && hi > lo { lo } else { 0.0 };
    let per_fold: Vec<FoldStats> = splits
        .par_iter()
        .enumerate()
        .map(|(f, (train, test))| {
            let fitted = FusionModel::fit_named(model, &table.subset(train), config)?;
            let held_out = table.subset(test);
            let pred = fitted.predict(&held_out, config.psnr.cap_db)?;
            let y: Vec<f64> = held_out.mos().iter().map(|m| (m - offset) / span).collect();
            let s = metric_stats(&pred, &y, None, config.evaluation.or_multiplier)
                .map_err(|e| Error::DegenerateInput(format!("fold {}: {e}", f + 1)))?;
            let mut groups: Vec<String> = held_out.groups().iter().map(|g| g.to_string()).collect();
            groups.dedup();
            Ok(FoldStats {
                fold: f + 1,
                train_rows: train.len(),
                test_rows: test.len(),
                test_groups: groups,
                pcc: s.pcc,
                srocc: s.srocc,
                rmse: s.rmse,
                or: s.or,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CrossValReport {
        model: model.to_string(),
        folds,
        seed: config.seed,
        config_hash: config.hash(),
        pcc: Summary::of(per_fold.iter().map(|f| f.pcc)),
        srocc: Summary::of(per_fold.iter().map(|f| f.srocc)),
        rmse: Summary::of(per_fold.iter().map(|f| f.rmse)),
        or: Summary::of(per_fold.iter().map(|f| f.or)),
        per_fold,
    })
}
