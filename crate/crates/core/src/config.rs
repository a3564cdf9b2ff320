//! Layered configuration: built-in defaults, then an optional TOML file,
//! then command-line overrides applied by the caller.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::EvaluationConfig;
use crate::metrics::graphsim::GraphSimConfig;
use crate::metrics::pcqm::PcqmConfig;
use crate::metrics::pointssim::PointSsimConfig;
use crate::metrics::psnr::PsnrConfig;
use crate::normals::DEFAULT_NORMAL_RADIUS;
use crate::regression::RegressionConfig;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PCQKIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalsConfig {
    /// Neighborhood radius for normal estimation when a cloud has none.
    pub radius: f64,
}

impl Default for NormalsConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_NORMAL_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads for extraction; `None` uses all logical cores.
    pub jobs: Option<usize>,
    /// Geometry bit depth override; `None` infers it from coordinates.
    pub bit_depth: Option<u32>,
    pub normals: NormalsConfig,
    pub psnr: PsnrConfig,
    pub pointssim: PointSsimConfig,
    pub pcqm: PcqmConfig,
    pub graphsim: GraphSimConfig,
    pub regression: RegressionConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 7,
            jobs: None,
            bit_depth: None,
            normals: NormalsConfig::default(),
            psnr: PsnrConfig::default(),
            pointssim: PointSsimConfig::default(),
            pcqm: PcqmConfig::default(),
            graphsim: GraphSimConfig::default(),
            regression: RegressionConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

/// The part of the configuration that changes extracted feature values.
#[derive(Serialize)]
struct ExtractionView<'a> {
    bit_depth: Option<u32>,
    normals: &'a NormalsConfig,
    psnr: &'a PsnrConfig,
    pointssim: &'a PointSsimConfig,
    pcqm: &'a PcqmConfig,
    graphsim: &'a GraphSimConfig,
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(json))
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Loads `explicit`, else the file named by `PCQKIT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(p),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the full effective configuration.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    /// Hash of the settings that affect feature extraction only.
    pub fn extraction_hash(&self) -> String {
        sha256_json(&ExtractionView {
            bit_depth: self.bit_depth,
            normals: &self.normals,
            psnr: &self.psnr,
            pointssim: &self.pointssim,
            pcqm: &self.pcqm,
            graphsim: &self.graphsim,
        })
    }
}
