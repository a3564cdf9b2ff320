//! Four-parameter logistic mapping `β1 + (β2 − β1) / (1 + exp(−β3 (x − β4)))`
//! fitted by least squares with Nelder–Mead from fixed starting points.

use serde::{Deserialize, Serialize};

use super::stats::spearman;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    pub rmse: f64,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

impl LogisticFit {
    pub fn apply(&self, x: f64) -> f64 {
        logistic(&self.beta, x)
    }
}

pub fn logistic(beta: &[f64; 4], x: f64) -> f64 {
    beta[0] + (beta[1] - beta[0]) / (1.0 + (-beta[2] * (x - beta[3])).exp())
}

fn sse(beta: &[f64; 4], x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(x, y)| (y - logistic(beta, *x)).powi(2)).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Nelder–Mead minimization; returns the best vertex and whether the simplex collapsed.
fn nelder_mead<F: Fn(&[f64; 4]) -> f64>(f: F, start: [f64; 4], steps: [f64; 4], max_iter: usize) -> ([f64; 4], f64, bool) {
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((start, f(&start)));
    for k in 0..4 {
        let mut v = start;
        v[k] += if steps[k] != 0.0 { steps[k] } else { 1e-3 };
        simplex.push((v, f(&v)));
    }
    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[4].1);
        let size = (1..5)
            .map(|i| (0..4).map(|k| (simplex[i].0[k] - simplex[0].0[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let scale = simplex[0].0.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if (worst - best).abs() <= 1e-16 * (1.0 + best.abs()) && size <= 1e-12 * scale {
            converged = true;
            break;
        }
        let mut centroid = [0.0; 4];
        for (v, _) in &simplex[..4] {
            for k in 0..4 {
                centroid[k] += v[k] / 4.0;
            }
        }
        let along = |t: f64| -> [f64; 4] { [0, 1, 2, 3].map(|k| centroid[k] + t * (simplex[4].0[k] - centroid[k])) };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            simplex[4] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (reflected, fr);
        } else {
            let contracted = if fr < worst { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            if fc < worst.min(fr) {
                simplex[4] = (contracted, fc);
            } else {
                let b = simplex[0].0;
                for (v, fv) in simplex.iter_mut().skip(1) {
                    *v = [0, 1, 2, 3].map(|k| b[k] + 0.5 * (v[k] - b[k]));
                    *fv = f(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, converged)
}

/// Least-squares line `y ≈ a + b x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Logistic parameters that reproduce the line `a + b x` over a span of
/// width `range` around `center` up to a negligible cubic term.
fn affine_embedding(a: f64, b: f64, center: f64, range: f64) -> [f64; 4] {
    const DELTA: f64 = 1e-5;
    let sign = if b < 0.0 { -1.0 } else { 1.0 };
    let beta3 = sign * DELTA / range;
    let span = 4.0 * b / beta3;
    let mid = a + b * center;
    [mid - span / 2.0, mid + span / 2.0, beta3, center]
}

const RESTARTS: usize = 20;

/// Fits the logistic mapping from `scores` to `mos`.
pub fn logistic_fit(scores: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    if scores.len() != mos.len() || scores.len() < 5 {
        return Err(Error::DegenerateInput(format!(
            "logistic fit needs at least 5 paired samples, got {}",
            scores.len().min(mos.len())
        )));
    }
    let (lo, hi) = scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateInput("scores are constant or non-finite".into()));
    }
    let range = hi - lo;
    let (mlo, mhi) = mos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mos_span = if mhi > mlo { mhi - mlo } else { 1.0 };
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let sign = match spearman(scores, mos) {
        Ok(r) if r < 0.0 => -1.0,
        _ => 1.0,
    };
    let init = [mlo, mhi, sign * 4.0 / range, median];
    let objective = |b: &[f64; 4]| sse(b, scores, mos);
    let steps = [0.1 * mos_span, 0.1 * mos_span, 0.5 * init[2], 0.1 * range];

    let mut best = (init, objective(&init), false);
    let mut consider = |cand: ([f64; 4], f64, bool)| {
        if cand.1 < best.1 {
            best = cand;
        }
    };
    let slope_factors = [1.0, 0.5, 2.0, 0.25, 4.0, 0.1, 10.0];
    let shifts = [0.0, -0.25, 0.25];
    for r in 0..RESTARTS {
        let mut start = init;
        start[2] *= slope_factors[r % slope_factors.len()];
        start[3] += shifts[(r / slope_factors.len()) % shifts.len()] * range;
        let first = nelder_mead(objective, start, steps, 4000);
        // Restarting from the result guards against a prematurely collapsed simplex.
        let second = nelder_mead(objective, first.0, steps.map(|s| s * 0.1), 4000);
        consider(if second.1 <= first.1 { second } else { first });
    }
    let (a, b) = linear_fit(scores, mos);
    let mean_x = scores.iter().sum::<f64>() / scores.len() as f64;
    let embedded = affine_embedding(a, b, mean_x, range);
    consider((embedded, objective(&embedded), true));
    let polished = nelder_mead(objective, embedded, [0, 1, 2, 3].map(|k| 1e-3 * embedded[k].abs().max(1e-9)), 4000);
    consider(polished);

    let (beta, total, converged) = best;
    let residuals: Vec<f64> = scores.iter().zip(mos).map(|(x, y)| y - logistic(&beta, *x)).collect();
    Ok(LogisticFit {
        beta,
        rmse: (total / scores.len() as f64).sqrt(),
        converged,
        residuals,
    })
}
