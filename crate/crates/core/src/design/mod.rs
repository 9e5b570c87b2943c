//! Catalogs, controller grids, the computation model and empirical design
//! problems built from Monte Carlo outcomes.

mod cache;
mod catalog;
mod empirical;
mod grids;

use thiserror::Error;

use crate::codesign::CodesignError;
use crate::control::ControlError;
use crate::order::OrderError;
use crate::plant::PlantError;

pub use cache::{CacheKey, SimCache, CACHE_SCHEMA_VERSION};
pub use catalog::{computation_model, Catalog, ComputerEntry, SensorEntry, StepCosts};
pub use empirical::{
    build_controller_relation, cell_noise, controller_functionality, monotonize, task_path, BuildSettings,
    EmpiricalRelation, FrequencyMode, NoiseCell, NoiseGrid, Sample, TaskPoint,
};
pub use grids::{controller_grid, ControllerGrids, Family, ParamSet, ParamsKind};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("unknown controller family `{0}`")]
    UnknownFamily(String),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Codesign(#[from] CodesignError),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// Rounds to four significant digits so that resource values compare exactly.
pub fn snap(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.3e}").parse().expect("formatted float parses")
}
