use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::check_shape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
}

impl RidgeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Minimizes `‖y − Xβ − b‖² + α‖β‖²`; the intercept is not penalized.
pub fn ridge_fit(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<RidgeModel> {
    let p = check_shape(x, y, 2)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("ridge alpha must be non-negative, got {alpha}")));
    }
    let n = x.len();
    let mut mean_x = vec![0.0; p];
    for r in x {
        for j in 0..p {
            mean_x[j] += r[j] / n as f64;
        }
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| x[i][j] - mean_x[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean_y));
    let gram = xc.transpose() * &xc + DMatrix::identity(p, p) * alpha;
    let rhs = xc.transpose() * yc;
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &d| (l.min(d), h.max(d)));
    // The gram condition number is (dmax / dmin)^2.
    if !(dmin > 1e-7 * dmax) {
        return Err(Error::SingularSystem);
    }
    let beta = chol.solve(&rhs);
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let intercept = mean_y - beta.iter().zip(&mean_x).map(|(b, m)| b * m).sum::<f64>();
    Ok(RidgeModel {
        coefficients: beta.iter().copied().collect(),
        intercept,
        alpha,
    })
}
