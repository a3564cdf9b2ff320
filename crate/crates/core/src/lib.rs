//! Full-reference point cloud quality metrics and regression-based fusion.

pub mod cloud;
pub mod color;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod index;
pub mod metrics;
pub mod normals;
pub mod ply;
pub mod regression;
pub(crate) mod serde_inf;
pub mod surface;
pub mod workflow;

pub use cloud::{bounding_box, BoundingBox, Point3, PointCloud, Rgb};
pub use config::Config;
pub use error::{Error, Result};
pub use index::SpatialIndex;
pub use ply::{load_ply, save_ply};
