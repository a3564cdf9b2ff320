use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),

    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),

    #[error("vertex count mismatch: header declares {declared}, found {found}")]
    CountMismatch { declared: usize, found: usize },

    #[error("malformed PLY body at vertex {vertex}: {reason}")]
    MalformedBody { vertex: usize, reason: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("missing attribute: {0}")]
    MissingAttribute(&'static str),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("normals could not be recovered: {0}")]
    MissingNormalsUnrecoverable(String),

    #[error("LAB2000HL mode requested but no table is loaded")]
    TableMissing,

    #[error("invalid LAB2000HL table: {0}")]
    BadTable(String),

    #[error("settings mismatch: {0}")]
    SettingsMismatch(String),

    #[error("unknown feature name `{0}`")]
    UnknownFeatureName(String),

    #[error("local graph around keypoint has no members")]
    EmptyNeighborhood,

    #[error("no keypoint produced a non-empty local graph at scale {scale}")]
    AllKeypointsEmpty { scale: usize },

    #[error("manifest is missing required column `{0}`")]
    MissingColumn(String),

    #[error("bad MOS value `{value}` on row {row}")]
    BadMosValue { row: usize, value: String },

    #[error("manifest row {row}: {reason}")]
    BadManifestRow { row: usize, reason: String },

    #[error("feature table: {0}")]
    BadFeatureTable(String),

    #[error("unsupported schema version `{0}`")]
    SchemaVersion(String),

    #[error("row {row} ({dist}): {source}")]
    Row {
        row: usize,
        dist: String,
        #[source]
        source: Box<Error>,
    },

    #[error("feature column `{0}` is missing")]
    MissingFeatureColumn(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("SVR solver did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    NonConvergence { iterations: usize, violation: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("need at least {folds} groups for {folds} folds, found {groups}")]
    TooFewGroups { groups: usize, folds: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("join mismatch: {0}")]
    JoinMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config hash mismatch: model expects {expected}, features carry {found}")]
    ConfigHashMismatch { expected: String, found: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the identity of the manifest row that caused it.
    pub fn at_row(self, row: usize, dist: impl Into<String>) -> Self {
        Error::Row {
            row,
            dist: dist.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
