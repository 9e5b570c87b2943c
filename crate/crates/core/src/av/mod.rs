//! Full vehicle co-design diagram: assembly from catalogs and empirical
//! controller relations, queries, task sweeps and exports.

mod assemble;
mod config;
mod report;

use thiserror::Error;

use crate::codesign::CodesignError;
use crate::design::DesignError;
use crate::order::OrderError;

pub use assemble::{assemble_diagram, computer_mdpi, sensor_mdpi, vehicle_mdpi, Study, NODE_NAMES};
pub use config::{AvConfig, CatalogPaths, DesignGrid, DiagramOptions, Nuisance, VehicleEnvelope};
pub use report::{
    parse_projection, sweep, write_exports, FrontPoint, Manifest, QueryReport, Staircase, SweepReport, SweepStep,
    EXPORT_SCHEMA_VERSION,
};

/// Resources exposed by the assembled diagram, in order.
pub const RESOURCE_NAMES: [&str; 6] = ["cost", "error", "effort", "speed_error", "discomfort", "danger"];

/// Functionality exposed by the assembled diagram, in order.
pub const FUNCTIONALITY_NAMES: [&str; 4] = ["speed", "curvature", "w_scale", "drop_p"];

#[derive(Debug, Error)]
pub enum AvError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("export: {0}")]
    Export(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Codesign(#[from] CodesignError),
    #[error(transparent)]
    Order(#[from] OrderError),
}
