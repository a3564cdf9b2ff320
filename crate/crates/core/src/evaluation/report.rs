//! Per-metric evaluation against MOS and the report artifact.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::logistic_fit;
use super::stats::{correlation_stats, error_stats};
use crate::error::{Error, Result};
use crate::features::DatasetManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Map MOS (and its deviations) to [0, 1] before fitting.
    pub normalize_mos: bool,
    /// Declared MOS scale; `None` uses the observed min and max.
    pub mos_range: Option<[f64; 2]>,
    /// Outlier threshold in units of the per-stimulus deviation.
    pub or_multiplier: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            normalize_mos: true,
            mos_range: None,
            or_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub pcc: f64,
    pub srocc: f64,
    pub rmse: f64,
    pub or: f64,
    pub beta: [f64; 4],
    pub n: usize,
    pub or_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub mos_range: [f64; 2],
    pub metrics: IndexMap<String, MetricStats>,
}

/// Fits, then scores one metric column.
pub fn metric_stats(scores: &[f64], mos: &[f64], mos_std: Option<&[f64]>, multiplier: f64) -> Result<MetricStats> {
    let fit = logistic_fit(scores, mos)?;
    let fitted: Vec<f64> = scores.iter().map(|&x| fit.apply(x)).collect();
    let (pcc, srocc) = correlation_stats(&fitted, mos)?;
    let err = error_stats(&fitted, mos, mos_std, multiplier);
    Ok(MetricStats {
        pcc,
        srocc,
        rmse: err.rmse,
        or: err.outlier_ratio,
        beta: fit.beta,
        n: scores.len(),
        or_fallback: err.fallback,
    })
}

fn normalization(mos: &[f64], cfg: &EvaluationConfig) -> Result<[f64; 2]> {
    if !cfg.normalize_mos {
        return Ok([0.0, 1.0]);
    }
    let [lo, hi] = cfg.mos_range.unwrap_or_else(|| {
        mos.iter()
            .fold([f64::INFINITY, f64::NEG_INFINITY], |[l, h], &v| [l.min(v), h.max(v)])
    });
    if !(hi > lo) {
        return Err(Error::ZeroVariance("MOS"));
    }
    Ok([lo, hi])
}

/// Evaluates named score columns against the same MOS vector.
pub fn evaluate_columns(
    columns: &[(String, Vec<f64>)],
    mos: &[f64],
    mos_std: Option<&[f64]>,
    cfg: &EvaluationConfig,
) -> Result<EvaluationReport> {
    let [lo, hi] = normalization(mos, cfg)?;
    let span = hi - lo;
    let mos_n: Vec<f64> = mos.iter().map(|m| (m - lo) / span).collect();
    let std_n: Option<Vec<f64>> = mos_std.map(|s| s.iter().map(|v| v / span).collect());
    let stats: Vec<Result<MetricStats>> = columns
        .par_iter()
        .map(|(name, scores)| {
            if scores.len() != mos.len() {
                return Err(Error::JoinMismatch(format!("column {name} has {} values for {} MOS", scores.len(), mos.len())));
            }
            metric_stats(scores, &mos_n, std_n.as_deref(), cfg.or_multiplier)
        })
        .collect();
    let mut metrics = IndexMap::new();
    for ((name, _), s) in columns.iter().zip(stats) {
        metrics.insert(name.clone(), s?);
    }
    Ok(EvaluationReport {
        config_hash: String::new(),
        mos_range: [lo, hi],
        metrics,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Aligned plain-text table, one metric per line.
    pub fn text_table(&self) -> String {
        let width = self.metrics.keys().map(String::len).chain([6]).max().unwrap_or(6);
        let mut out = format!("{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>5}\n", "Metric", "PCC", "SROCC", "RMSE", "OR", "N");
        for (name, s) in &self.metrics {
            let or = if s.or_fallback { format!("{:.3}*", s.or) } else { format!("{:.3}", s.or) };
            out.push_str(&format!(
                "{:<width$}  {:>7.3}  {:>7.3}  {:>7.3}  {:>7}  {:>5}\n",
                name, s.pcc, s.srocc, s.rmse, or, s.n
            ));
        }
        if self.metrics.values().any(|s| s.or_fallback) {
            out.push_str("* outlier threshold from RMSE (no per-stimulus MOS deviation)\n");
        }
        out
    }
}

/// Score columns keyed by `(ref, dist)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub keys: Vec<(String, String)>,
    pub names: Vec<String>,
    /// `columns[c][row]`.
    pub columns: Vec<Vec<f64>>,
}

const KEY_COLUMNS: [&str; 4] = ["group_id", "ref", "dist", "mos"];

impl ScoreTable {
    /// Reads any CSV with `ref` and `dist` columns; lines starting with `#`
    /// are skipped and every other column except `group_id` and `mos` is a score.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv.headers()?.clone();
        let find = |n: &str| headers.iter().position(|h| h == n).ok_or_else(|| Error::MissingColumn(n.into()));
        let (c_ref, c_dist) = (find("ref")?, find("dist")?);
        let score_cols: Vec<usize> = (0..headers.len()).filter(|&c| !KEY_COLUMNS.contains(&&headers[c])).collect();
        let mut table = ScoreTable {
            names: score_cols.iter().map(|&c| headers[c].to_string()).collect(),
            columns: vec![Vec::new(); score_cols.len()],
            ..Default::default()
        };
        for (i, rec) in csv.records().enumerate() {
            let rec = rec?;
            table.keys.push((rec[c_ref].to_string(), rec[c_dist].to_string()));
            for (k, &c) in score_cols.iter().enumerate() {
                let v = rec[c]
                    .parse()
                    .map_err(|_| Error::BadFeatureTable(format!("row {}: `{}` is not a number", i + 1, &rec[c])))?;
                table.columns[k].push(v);
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, comment: &str, mut out: W) -> Result<()> {
        if !comment.is_empty() {
            writeln!(out, "#{comment}").map_err(|e| Error::io("<scores csv>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["ref".to_string(), "dist".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, (r, d)) in self.keys.iter().enumerate() {
            let mut rec = vec![r.clone(), d.clone()];
            rec.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<scores csv>", e))?;
        Ok(())
    }
}

/// Joins scores to the manifest on `(ref, dist)` and evaluates `columns`
/// (all score columns when `None`).
pub fn evaluate(
    scores: &ScoreTable,
    manifest: &DatasetManifest,
    columns: Option<&[String]>,
    cfg: &EvaluationConfig,
) -> Result<EvaluationReport> {
    if scores.keys.len() != manifest.rows.len() {
        return Err(Error::JoinMismatch(format!(
            "{} score rows for {} manifest rows",
            scores.keys.len(),
            manifest.rows.len()
        )));
    }
    let mut order = Vec::with_capacity(manifest.rows.len());
    for (i, row) in manifest.rows.iter().enumerate() {
        let key = (row.ref_name.clone(), row.dist_name.clone());
        let pos = scores.keys.iter().position(|k| *k == key).ok_or_else(|| {
            Error::JoinMismatch(format!("manifest row {} ({}, {}) has no score", i + 1, key.0, key.1))
        })?;
        order.push(pos);
    }
    let wanted: Vec<String> = columns.map_or_else(|| scores.names.clone(), <[String]>::to_vec);
    let mut selected = Vec::with_capacity(wanted.len());
    for name in wanted {
        let c = scores
            .names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::MissingFeatureColumn(name.clone()))?;
        selected.push((name, order.iter().map(|&r| scores.columns[c][r]).collect()));
    }
    let mos: Vec<f64> = manifest.rows.iter().map(|r| r.mos).collect();
    let std = manifest.mos_std();
    evaluate_columns(&selected, &mos, std.as_deref(), cfg)
}
