//! Recursive feature elimination.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_shape, pearson_or_zero, ridge_fit, svr_fit, SvrParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RfeEstimator {
    /// Importance = |coefficient|.
    Ridge { alpha: f64 },
    /// Importance = mean drop of the training-fit PCC when the column is permuted.
    Svr { params: SvrParams, permutations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeRound {
    pub surviving: Vec<String>,
    pub importance: Vec<f64>,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Most important first.
    pub ranking: Vec<String>,
    pub rounds: Vec<RfeRound>,
}

fn columns(x: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    x.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
}

/// Importance of each column of `x` under `estimator`.
pub fn importances(x: &[Vec<f64>], y: &[f64], estimator: &RfeEstimator, seed: u64) -> Result<Vec<f64>> {
    match estimator {
        RfeEstimator::Ridge { alpha } => Ok(ridge_fit(x, y, *alpha)?.coefficients.iter().map(|c| c.abs()).collect()),
        RfeEstimator::Svr { params, permutations } => {
            let model = svr_fit(x, y, params)?;
            let base_pred: Vec<f64> = x.iter().map(|r| model.predict_row(r)).collect();
            let base = pearson_or_zero(&base_pred, y);
            let p = x[0].len();
            let mut out = Vec::with_capacity(p);
            for j in 0..p {
                let mut drop = 0.0;
                for r in 0..*permutations {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((j as u64) << 32 | r as u64));
                    let mut col: Vec<f64> = x.iter().map(|row| row[j]).collect();
                    col.shuffle(&mut rng);
                    let pred: Vec<f64> = x
                        .iter()
                        .zip(&col)
                        .map(|(row, &v)| {
                            let mut row = row.clone();
                            row[j] = v;
                            model.predict_row(&row)
                        })
                        .collect();
                    drop += base - pearson_or_zero(&pred, y);
                }
                out.push(drop / (*permutations).max(1) as f64);
            }
            Ok(out)
        }
    }
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Position in `imp` of the least important entry; near-ties go to the
/// higher position so lower feature indices survive longer.
fn least_important(imp: &[f64]) -> usize {
    let mut worst = 0;
    for k in 1..imp.len() {
        let tol = TIE_TOLERANCE * imp[k].abs().max(imp[worst].abs());
        if imp[k] < imp[worst] - tol || (imp[k] - imp[worst]).abs() <= tol {
            worst = k;
        }
    }
    worst
}

/// Ranks features by recursively dropping the `step` least important ones.
pub fn rfe_rank(
    x: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    estimator: &RfeEstimator,
    step: usize,
    seed: u64,
) -> Result<FeatureRanking> {
    let p = check_shape(x, y, 2)?;
    if p != names.len() {
        return Err(Error::DegenerateInput(format!("{} names for {p} features", names.len())));
    }
    if p < 2 {
        return Err(Error::DegenerateInput("RFE needs at least two features".into()));
    }
    let step = step.max(1);
    let mut surviving: Vec<usize> = (0..p).collect();
    let mut eliminated = Vec::with_capacity(p);
    let mut rounds = Vec::new();
    while surviving.len() > 1 {
        let mut imp = importances(&columns(x, &surviving), y, estimator, seed)?;
        let round_names: Vec<String> = surviving.iter().map(|&c| names[c].clone()).collect();
        let round_imp = imp.clone();
        let mut removed = Vec::new();
        for _ in 0..step.min(surviving.len() - 1) {
            let k = least_important(&imp);
            removed.push(names[surviving[k]].clone());
            eliminated.push(surviving.remove(k));
            imp.remove(k);
        }
        rounds.push(RfeRound {
            surviving: round_names,
            importance: round_imp,
            removed,
        });
    }
    eliminated.extend(surviving);
    Ok(FeatureRanking {
        ranking: eliminated.iter().rev().map(|&c| names[c].clone()).collect(),
        rounds,
    })
}
