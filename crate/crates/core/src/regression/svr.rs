//! ε-SVR with an RBF kernel, solved in the dual by pairwise (SMO) updates
//! with second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::check_shape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` means `1 / (p · Var(X))`.
    pub gamma: Option<f64>,
    /// Stopping tolerance on the maximal violating pair.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i − α*_i` of each support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub iterations: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl SvrModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.dual_coefficients)
                .map(|(sv, b)| b * rbf(sv, row, self.gamma))
                .sum::<f64>()
    }
}

/// `1 / (p · Var(X))` over all entries, or 1 when X has no variance.
pub fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let vals: Vec<f64> = x.iter().flatten().copied().collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let p = x.first().map_or(1, Vec::len) as f64;
    if var > 0.0 {
        1.0 / (p * var)
    } else {
        1.0
    }
}

pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    x.iter().map(|a| x.iter().map(|b| rbf(a, b, gamma)).collect()).collect()
}

/// Dual objective `−½ βᵀKβ − ε Σ|β| + Σ y β`, maximized by the solver.
pub fn dual_objective(kernel: &[Vec<f64>], y: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let mut quad = 0.0;
    for (i, row) in kernel.iter().enumerate() {
        for (j, k) in row.iter().enumerate() {
            quad += beta[i] * beta[j] * k;
        }
    }
    -0.5 * quad - epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
        + y.iter().zip(beta).map(|(t, b)| t * b).sum::<f64>()
}

const TAU: f64 = 1e-12;

struct Solver<'a> {
    kernel: &'a [Vec<f64>],
    l: usize,
    c: f64,
    /// Variables `0..l` carry sign +1, `l..2l` carry sign −1.
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl Solver<'_> {
    fn sign(&self, t: usize) -> f64 {
        if t < self.l {
            1.0
        } else {
            -1.0
        }
    }

    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.kernel[s % self.l][t % self.l]
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Maximal violating pair with second-order selection of the second
    /// index; also returns the current violation `m − M`.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let n = 2 * self.l;
        let mut gmax = f64::NEG_INFINITY;
        let mut i_best = None;
        for t in 0..n {
            let y = self.sign(t);
            if (y > 0.0 && !self.at_upper(t)) || (y < 0.0 && !self.at_lower(t)) {
                let v = -y * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i_best = Some(t);
                }
            }
        }
        let Some(i) = i_best else {
            return (None, 0.0);
        };
        let yi = self.sign(i);
        let qii = self.q(i, i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_best = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let y = self.sign(t);
            if (y > 0.0 && !self.at_lower(t)) || (y < 0.0 && !self.at_upper(t)) {
                let v = y * self.grad[t];
                gmax2 = gmax2.max(v);
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = qii + self.q(t, t) - 2.0 * yi * y * self.q(i, t);
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -diff * diff / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_best = Some(t);
                    }
                }
            }
        }
        let violation = gmax + gmax2;
        (j_best.map(|j| (i, j)), violation)
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = self.q(i, j);
        let (mut ai, mut aj) = (old_i, old_j);
        if self.sign(i) != self.sign(j) {
            let quad = self.q(i, i) + self.q(j, j) + 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = self.q(i, i) + self.q(j, j) - 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..2 * self.l {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum_free) = (0usize, 0.0);
        for t in 0..2 * self.l {
            let y = self.sign(t);
            let yg = y * self.grad[t];
            if self.at_upper(t) {
                if y < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if y > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum_free += yg;
            }
        }
        if free > 0 {
            sum_free / free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

/// Trains an ε-SVR on `x` (rows) and targets `y`.
pub fn svr_fit(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<SvrModel> {
    check_shape(x, y, 2)?;
    if !(params.c > 0.0 && params.epsilon >= 0.0 && params.tolerance > 0.0) {
        return Err(Error::Config("SVR needs C > 0, epsilon >= 0, tolerance > 0".into()));
    }
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(x));
    let kernel = kernel_matrix(x, gamma);
    let l = x.len();
    let mut solver = Solver {
        kernel: &kernel,
        l,
        c: params.c,
        alpha: vec![0.0; 2 * l],
        grad: (0..2 * l)
            .map(|t| if t < l { params.epsilon - y[t] } else { params.epsilon + y[t - l] })
            .collect(),
    };
    let mut iterations = 0;
    loop {
        let (pair, violation) = solver.select();
        let Some((i, j)) = pair.filter(|_| violation >= params.tolerance) else {
            break;
        };
        if iterations >= params.max_iterations {
            return Err(Error::NonConvergence { iterations, violation });
        }
        solver.update(i, j);
        iterations += 1;
    }
    let bias = -solver.rho();
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for i in 0..l {
        let beta = solver.alpha[i] - solver.alpha[i + l];
        if beta != 0.0 {
            support_vectors.push(x[i].clone());
            dual_coefficients.push(beta);
        }
    }
    log::debug!("SVR converged after {iterations} iterations, {} support vectors", support_vectors.len());
    Ok(SvrModel {
        support_vectors,
        dual_coefficients,
        bias,
        c: params.c,
        epsilon: params.epsilon,
        gamma,
        iterations,
    })
}

/// Full-length dual coefficients of `model` aligned with the training rows.
pub fn training_duals(model: &SvrModel, x: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut used = vec![false; model.support_vectors.len()];
    for (i, row) in x.iter().enumerate() {
        if let Some(k) = (0..used.len()).find(|&k| !used[k] && &model.support_vectors[k] == row) {
            used[k] = true;
            out[i] = model.dual_coefficients[k];
        }
    }
    out
}

/// Largest violation of the ε-SVR optimality conditions on the training set.
///
/// With residual `r = y − f(x)`: `β = 0` needs `|r| ≤ ε`, `0 < β < C` needs
/// `r = ε`, `β = C` needs `r ≥ ε`, and symmetrically for negative `β`.
pub fn kkt_violation(model: &SvrModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let duals = training_duals(model, x);
    let (c, eps) = (model.c, model.epsilon);
    let bound = |v: f64| v >= c * (1.0 - 1e-12);
    x.iter()
        .zip(y)
        .zip(&duals)
        .map(|((row, &t), &b)| {
            let r = t - model.predict_row(row);
            if b == 0.0 {
                (r.abs() - eps).max(0.0)
            } else if b > 0.0 {
                if bound(b) {
                    (eps - r).max(0.0)
                } else {
                    (r - eps).abs()
                }
            } else if bound(-b) {
                (r + eps).max(0.0)
            } else {
                (r + eps).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let y = x
            .iter()
            .map(|r| (3.0 * r[0]).sin() + r.iter().sum::<f64>() * 0.5 + rng.random_range(-0.2..0.2))
            .collect();
        (x, y)
    }

    /// Random dual point with `Σβ = 0` and `|β| ≤ C`.
    fn random_feasible(rng: &mut ChaCha8Rng, n: usize, c: f64) -> Vec<f64> {
        let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-c..c)).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > c {
            b.iter_mut().for_each(|v| *v *= c / peak);
        }
        b
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let y = vec![0.7; 10];
        let m = svr_fit(&x, &y, &SvrParams::default()).unwrap();
        assert!(m.dual_coefficients.is_empty());
        assert!((m.bias - 0.7).abs() < 1e-12);
        assert!((m.predict_row(&[0.33]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn shallow_line_inside_tube() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.5 + 0.05 * r[0]).collect();
        let m = svr_fit(&x, &y, &SvrParams::default()).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict_row(r) - t).abs() <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn kkt_and_dual_optimality() {
        for seed in 0..5 {
            let (x, y) = random_problem(seed, 20, 3);
            let params = SvrParams::default();
            let m = svr_fit(&x, &y, &params).unwrap();
            assert!(kkt_violation(&m, &x, &y) <= 1e-3);
            assert!(m.dual_coefficients.iter().all(|b| b.abs() <= params.c + 1e-12));
            assert!(m.dual_coefficients.iter().sum::<f64>().abs() < 1e-9);
            let kernel = kernel_matrix(&x, m.gamma);
            let trained = dual_objective(&kernel, &y, &training_duals(&m, &x), m.epsilon);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            for _ in 0..2000 {
                let b = random_feasible(&mut rng, x.len(), params.c);
                assert!(trained >= dual_objective(&kernel, &y, &b, m.epsilon) - 1e-9);
            }
        }
    }

    #[test]
    fn support_vector_prediction_within_tube() {
        let (x, y) = random_problem(9, 15, 2);
        let params = SvrParams {
            c: 1e3,
            epsilon: 0.05,
            gamma: Some(5.0),
            ..Default::default()
        };
        let m = svr_fit(&x, &y, &params).unwrap();
        let duals = training_duals(&m, &x);
        for ((row, t), b) in x.iter().zip(&y).zip(&duals) {
            if *b != 0.0 && b.abs() < params.c {
                assert!((m.predict_row(row) - t).abs() <= params.epsilon + 1e-3);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let (x, y) = random_problem(4, 30, 3);
        let params = SvrParams {
            max_iterations: 1,
            c: 100.0,
            ..Default::default()
        };
        match svr_fit(&x, &y, &params) {
            Err(Error::NonConvergence { iterations: 1, violation }) => assert!(violation > 1e-3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
