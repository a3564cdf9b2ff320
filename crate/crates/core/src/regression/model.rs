//! Trained fused model: selected features, scaler and regressor, stored as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::registry::{model_registry, RegressorKind};
use super::{ridge_fit, svr_fit, RidgeModel, Scaler, SvrModel};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::features::FeatureTable;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Ridge(RidgeModel),
    Svr(SvrModel),
}

impl Regressor {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::Ridge(m) => m.predict_row(row),
            Regressor::Svr(m) => m.predict_row(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub rows: usize,
    pub groups: usize,
    pub config_hash: String,
    pub extraction_hash: String,
    pub constant_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub schema_version: u32,
    pub name: String,
    pub features: Vec<String>,
    pub scaler: Scaler,
    pub regressor: Regressor,
    pub training: TrainingInfo,
}

/// Replaces infinities by `±cap`.
pub fn finite_rows(rows: Vec<Vec<f64>>, cap: f64) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|v| if v.is_infinite() { cap.copysign(v) } else { v }).collect())
        .collect()
}

impl FusionModel {
    /// Fits `kind` on the named columns of `table` against its MOS column.
    pub fn fit(name: &str, features: &[String], kind: RegressorKind, table: &FeatureTable, config: &Config) -> Result<Self> {
        let raw = finite_rows(table.select(features)?, config.psnr.cap_db);
        let y = table.mos();
        let scaler = Scaler::fit(&raw)?;
        let x = scaler.transform(&raw);
        let regressor = match kind {
            RegressorKind::Ridge => Regressor::Ridge(ridge_fit(&x, &y, config.regression.alpha)?),
            RegressorKind::Svr => Regressor::Svr(svr_fit(&x, &y, &config.regression.svr)?),
        };
        let mut groups = table.groups();
        groups.sort_unstable();
        groups.dedup();
        Ok(Self {
            schema_version: MODEL_SCHEMA_VERSION,
            name: name.to_string(),
            features: features.to_vec(),
            training: TrainingInfo {
                rows: table.len(),
                groups: groups.len(),
                config_hash: config.hash(),
                extraction_hash: table.extraction_hash.clone(),
                constant_features: scaler.constant_features().iter().map(|&j| features[j].clone()).collect(),
            },
            scaler,
            regressor,
        })
    }

    /// Fits a registry model (`model1`..`model8`, `fsm`).
    pub fn fit_named(name: &str, table: &FeatureTable, config: &Config) -> Result<Self> {
        let spec = model_registry(name)?;
        let features: Vec<String> = spec.features.iter().map(|s| s.to_string()).collect();
        Self::fit(name, &features, spec.kind, table, config)
    }

    pub fn predict_rows(&self, raw: &[Vec<f64>]) -> Vec<f64> {
        raw.iter()
            .map(|r| self.regressor.predict_row(&self.scaler.transform_row(r)))
            .collect()
    }

    /// Predicts every row of `table`; infinities are capped at `cap`.
    pub fn predict(&self, table: &FeatureTable, cap: f64) -> Result<Vec<f64>> {
        Ok(self.predict_rows(&finite_rows(table.select(&self.features)?, cap)))
    }

    /// Refuses tables extracted with different settings unless `force`.
    pub fn check_compatible(&self, table: &FeatureTable, force: bool) -> Result<()> {
        let (expected, found) = (&self.training.extraction_hash, &table.extraction_hash);
        if expected != found && !force {
            return Err(Error::ConfigHashMismatch {
                expected: expected.clone(),
                found: found.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: u32,
        }
        let v: Version = serde_json::from_str(text)?;
        if v.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(v.schema_version.to_string()));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
