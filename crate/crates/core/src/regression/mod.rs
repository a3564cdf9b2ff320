//! Min-max scaling, ridge and ε-SVR regressors, RFE ranking, grouped
//! cross-validation splits and the fused model registry.

pub mod model;
pub mod registry;
pub mod rfe;
pub mod ridge;
pub mod scaler;
pub mod split;
pub mod svr;

use serde::{Deserialize, Serialize};

pub use model::{FusionModel, Regressor, TrainingInfo};
pub use registry::{model_registry, ModelSpec, RegressorKind};
pub use rfe::{rfe_rank, FeatureRanking, RfeEstimator};
pub use ridge::{ridge_fit, RidgeModel};
pub use scaler::{scaler_fit_apply, Scaler};
pub use split::group_kfold;
pub use svr::{svr_fit, SvrModel, SvrParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// Ridge penalty.
    pub alpha: f64,
    pub svr: SvrParams,
    /// Features removed per RFE round.
    pub rfe_step: usize,
    /// Column permutations per feature for SVR importance.
    pub permutations: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            svr: SvrParams::default(),
            rfe_step: 1,
            permutations: 10,
        }
    }
}

/// Pearson correlation; 0 when either side has no variance.
pub(crate) fn pearson_or_zero(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

pub(crate) fn check_shape(x: &[Vec<f64>], y: &[f64], min_rows: usize) -> crate::Result<usize> {
    if x.len() != y.len() {
        return Err(crate::Error::DegenerateInput(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_rows {
        return Err(crate::Error::DegenerateInput(format!(
            "need at least {min_rows} rows, got {}",
            x.len()
        )));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(crate::Error::DegenerateInput("ragged feature rows".into()));
    }
    Ok(p)
}
