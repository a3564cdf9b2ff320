//! Named fused models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Ridge,
    Svr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: &'static str,
    pub kind: RegressorKind,
    pub features: &'static [&'static str],
}

const MODELS: &[ModelSpec] = &[
    ModelSpec {
        name: "model1",
        kind: RegressorKind::Svr,
        features: &[
            "pcqm_f2", "pcqm_f4", "pcqm_f5", "pcqm_f6", "msgsim_mg_s0", "msgsim_ug_s0", "msgsim_cg_s0", "psnr_d2",
        ],
    },
    ModelSpec {
        name: "model2",
        kind: RegressorKind::Svr,
        features: &[
            "pcqm_f2", "pcqm_f4", "pcqm_f5", "pcqm_f6", "pcqm_f7", "msgsim_mg_s0", "msgsim_cg_s0", "psnr_d2",
            "pointssim_geo", "pointssim_lum",
        ],
    },
    // The published row repeats the scale-0 m_g term; c_g at scale 0 fills the fourteenth slot.
    ModelSpec {
        name: "model3",
        kind: RegressorKind::Svr,
        features: &[
            "pcqm_f2", "pcqm_f4", "pcqm_f5", "pcqm_f7", "pcqm_f8", "msgsim_mg_s0", "msgsim_ug_s0", "msgsim_cg_s0",
            "msgsim_ug_s2", "msgsim_cg_s2", "psnr_d2", "psnr_v", "pointssim_geo", "pointssim_lum",
        ],
    },
    ModelSpec {
        name: "model4",
        kind: RegressorKind::Svr,
        features: &["pcqm_f2", "pcqm_f4", "pcqm_f5", "msgsim_mg_s0"],
    },
    ModelSpec {
        name: "model5",
        kind: RegressorKind::Ridge,
        features: &["pcqm_f2", "pcqm_f4", "pcqm_f5", "pcqm_f7", "msgsim_mg_s0", "psnr_d2"],
    },
    ModelSpec {
        name: "model6",
        kind: RegressorKind::Ridge,
        features: &[
            "pcqm_f2", "pcqm_f4", "pcqm_f5", "pcqm_f7", "pcqm_f8", "msgsim_mg_s0", "msgsim_cg_s0", "msgsim_mg_s2",
            "msgsim_cg_s2", "psnr_d2", "pointssim_geo",
        ],
    },
    ModelSpec {
        name: "model7",
        kind: RegressorKind::Ridge,
        features: &[
            "pcqm_f1", "pcqm_f2", "pcqm_f4", "pcqm_f5", "pcqm_f7", "pcqm_f8", "msgsim_mg_s0", "msgsim_cg_s0",
            "msgsim_cg_s1", "msgsim_cg_s2", "psnr_d2", "psnr_y", "psnr_u", "psnr_v", "pointssim_geo",
        ],
    },
    ModelSpec {
        name: "model8",
        kind: RegressorKind::Ridge,
        features: &["pcqm_f2", "pcqm_f4", "pcqm_f5", "msgsim_mg_s0"],
    },
];

/// Looks up `model1`..`model8`; `fsm` is an alias of `model5`.
pub fn model_registry(name: &str) -> Result<ModelSpec> {
    let key = if name.eq_ignore_ascii_case("fsm") { "model5" } else { name };
    MODELS
        .iter()
        .find(|m| m.name.eq_ignore_ascii_case(key))
        .cloned()
        .ok_or_else(|| Error::UnknownModel(name.to_string()))
}

pub fn model_names() -> impl Iterator<Item = &'static str> {
    MODELS.iter().map(|m| m.name)
}
