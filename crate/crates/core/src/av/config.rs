use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AvError;
use crate::design::{BuildSettings, Catalog, ControllerGrids, Family, FrequencyMode, NoiseGrid, TaskPoint};
use crate::plant::{CurvatureLevel, PathKind};

/// Nuisance levels the design must tolerate besides the sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub w_scale: f64,
    pub drop_p: f64,
}

impl Default for Nuisance {
    fn default() -> Self {
        Nuisance { w_scale: 1.0, drop_p: 0.0 }
    }
}

/// Power and payload the vehicle platform supplies to the components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleEnvelope {
    /// [W]
    pub power: f64,
    /// [g]
    pub payload: f64,
}

impl Default for VehicleEnvelope {
    fn default() -> Self {
        VehicleEnvelope { power: 500.0, payload: 200_000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramOptions {
    pub lateral_families: Vec<Family>,
    #[serde(default)]
    pub frequency_mode: FrequencyMode,
    #[serde(default)]
    pub vehicle: VehicleEnvelope,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions {
            lateral_families: vec![Family::Stanley, Family::PurePursuit, Family::Lqr, Family::Nmpc],
            frequency_mode: FrequencyMode::Neglected,
            vehicle: VehicleEnvelope::default(),
        }
    }
}

/// Functionality grid over which the controller design problems are sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    pub speeds: Vec<f64>,
    pub curvatures: Vec<CurvatureLevel>,
    pub noise: NoiseGrid,
}

impl Default for DesignGrid {
    fn default() -> Self {
        DesignGrid {
            speeds: vec![8.0, 15.0],
            curvatures: vec![CurvatureLevel::Low, CurvatureLevel::High],
            noise: NoiseGrid::default(),
        }
    }
}

impl DesignGrid {
    pub fn tasks(&self, scenario: PathKind) -> Vec<TaskPoint> {
        let mut out = Vec::new();
        for &speed in &self.speeds {
            for &c in &self.curvatures {
                out.push(TaskPoint::new(scenario, c, speed));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogPaths {
    pub sensors: PathBuf,
    pub computers: PathBuf,
}

impl Default for CatalogPaths {
    fn default() -> Self {
        CatalogPaths { sensors: "catalogs/sensors.json".into(), computers: "catalogs/computers.json".into() }
    }
}

/// Single JSON document describing a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvConfig {
    pub task: TaskPoint,
    #[serde(default)]
    pub nuisance: Nuisance,
    #[serde(default)]
    pub diagram: DiagramOptions,
    #[serde(default)]
    pub grids: ControllerGrids,
    #[serde(default)]
    pub design_grid: DesignGrid,
    #[serde(default)]
    pub catalog: CatalogPaths,
    #[serde(default)]
    pub build: BuildSettings,
    /// Pairs of exposed resources for two-dimensional reports.
    #[serde(default = "default_projections")]
    pub projections: Vec<[String; 2]>,
    /// Ascending chain of tasks for the monotonicity sweep.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<TaskPoint>,
}

fn default_projections() -> Vec<[String; 2]> {
    vec![["error".into(), "effort".into()], ["cost".into(), "error".into()]]
}

fn default_sweep() -> Vec<TaskPoint> {
    vec![
        TaskPoint::new(PathKind::NinetyDegreeTurn, CurvatureLevel::Low, 8.0),
        TaskPoint::new(PathKind::NinetyDegreeTurn, CurvatureLevel::High, 15.0),
    ]
}

impl Default for AvConfig {
    fn default() -> Self {
        AvConfig {
            task: TaskPoint::new(PathKind::NinetyDegreeTurn, CurvatureLevel::Low, 8.0),
            nuisance: Nuisance::default(),
            diagram: DiagramOptions::default(),
            grids: ControllerGrids::default(),
            design_grid: DesignGrid::default(),
            catalog: CatalogPaths::default(),
            build: BuildSettings::default(),
            projections: default_projections(),
            sweep: default_sweep(),
        }
    }
}

impl AvConfig {
    /// Reads a config; relative catalog paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, AvError> {
        let text = std::fs::read_to_string(path).map_err(|e| AvError::Io(format!("{}: {e}", path.display())))?;
        let mut c: AvConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.catalog.sensors, &mut c.catalog.computers] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), AvError> {
        if self.diagram.lateral_families.is_empty() {
            return Err(AvError::Config("at least one lateral controller family is required".into()));
        }
        if self.diagram.lateral_families.contains(&Family::Pid) {
            return Err(AvError::Config("pid is a longitudinal controller".into()));
        }
        for [a, b] in &self.projections {
            for n in [a, b] {
                if !super::RESOURCE_NAMES.contains(&n.as_str()) {
                    return Err(AvError::Config(format!("unknown projection coordinate `{n}`")));
                }
            }
        }
        if self.build.runs == 0 {
            return Err(AvError::Config("at least one Monte Carlo run is required".into()));
        }
        Ok(())
    }

    pub fn load_catalog(&self) -> Result<Catalog, AvError> {
        Ok(Catalog::load(&self.catalog.sensors, &self.catalog.computers)?)
    }

    /// SHA-256 of the canonical JSON form, catalog paths excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.catalog = CatalogPaths::default();
        hex::encode(Sha256::digest(serde_json::to_string(&c).expect("config serialises").as_bytes()))
    }
}

impl AvConfig {
    /// Build settings with the diagram's frequency mode applied.
    pub fn settings(&self) -> BuildSettings {
        BuildSettings { frequency_mode: self.diagram.frequency_mode, ..self.build.clone() }
    }
}
