use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature min-max scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::DegenerateInput("cannot fit a scaler on zero rows".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for r in rows {
            if r.len() != min.len() {
                return Err(Error::DegenerateInput("ragged feature rows".into()));
            }
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Indices of features with `max == min`; they always map to 0.
    pub fn constant_features(&self) -> Vec<usize> {
        (0..self.min.len()).filter(|&j| self.max[j] <= self.min[j]).collect()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    ((v - self.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

pub type Scaled = (Vec<Vec<f64>>, Vec<Vec<f64>>, Scaler);

/// Fits on `train`, then scales both tables with the training bounds.
pub fn scaler_fit_apply(train: &[Vec<f64>], test: &[Vec<f64>]) -> Result<Scaled> {
    let scaler = Scaler::fit(train)?;
    let constant = scaler.constant_features();
    if !constant.is_empty() {
        log::warn!("constant features {constant:?} scaled to 0");
    }
    Ok((scaler.transform(train), scaler.transform(test), scaler))
}
