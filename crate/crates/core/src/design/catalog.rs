use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DesignError, Family, ParamSet, ParamsKind};

/// Illustrative sensor data; the noise scale multiplies the base measurement covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub name: String,
    pub v_scale: f64,
    /// [Hz]
    pub max_frequency: f64,
    /// [CHF]
    pub cost: f64,
    /// [W]
    pub power: f64,
    /// [g]
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputerEntry {
    pub name: String,
    /// Normalised operations per second.
    pub compute_capacity: f64,
    pub cost: f64,
    pub power: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub sensors: Vec<SensorEntry>,
    pub computers: Vec<ComputerEntry>,
}

impl Catalog {
    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::Catalog(m));
        for s in &self.sensors {
            if !(s.v_scale > 0.0) {
                return bad(format!("sensor {}: noise scale must be positive", s.name));
            }
            if [s.max_frequency, s.cost, s.power, s.mass].iter().any(|x| !(*x >= 0.0)) {
                return bad(format!("sensor {}: physical fields must be non-negative", s.name));
            }
        }
        for c in &self.computers {
            if [c.compute_capacity, c.cost, c.power, c.mass].iter().any(|x| !(*x >= 0.0)) {
                return bad(format!("computer {}: fields must be non-negative", c.name));
            }
        }
        let mut names: Vec<&str> = self.sensors.iter().map(|s| s.name.as_str()).collect();
        names.extend(self.computers.iter().map(|c| c.name.as_str()));
        let n = names.len();
        names.sort_unstable();
        names.dedup();
        if names.len() != n {
            return bad("duplicate entry names".into());
        }
        Ok(())
    }

    /// Reads JSON arrays of sensors and computers from two files.
    pub fn load(sensors: &Path, computers: &Path) -> Result<Self, DesignError> {
        let c = Catalog {
            sensors: serde_json::from_str(&std::fs::read_to_string(sensors)?)?,
            computers: serde_json::from_str(&std::fs::read_to_string(computers)?)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn sensors_json(&self) -> Result<String, DesignError> {
        Ok(serde_json::to_string_pretty(&self.sensors)?)
    }

    pub fn computers_json(&self) -> Result<String, DesignError> {
        Ok(serde_json::to_string_pretty(&self.computers)?)
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("catalog serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// The illustrative catalog shipped with the default configuration.
    pub fn sample() -> Self {
        let sensor = |name: &str, v_scale, max_frequency, cost, power, mass| SensorEntry {
            name: name.into(),
            v_scale,
            max_frequency,
            cost,
            power,
            mass,
        };
        let computer = |name: &str, compute_capacity, cost, power, mass| ComputerEntry {
            name: name.into(),
            compute_capacity,
            cost,
            power,
            mass,
        };
        Catalog {
            sensors: vec![
                sensor("hdl_64", 1.0, 20.0, 39000.0, 60.0, 12700.0),
                sensor("os1_128", 4.0, 20.0, 15000.0, 20.0, 450.0),
                sensor("basler_ace_251gm", 16.0, 100.0, 1500.0, 3.0, 90.0),
            ],
            computers: vec![
                computer("rpi_4b", 1.0, 75.0, 7.0, 46.0),
                computer("jetson_nano", 2.5, 150.0, 10.0, 140.0),
                computer("jetson_agx_xavier", 32.0, 900.0, 30.0, 280.0),
            ],
        }
    }
}

/// Per-update computational cost of each controller family, in the same
/// normalised units as the computer capacities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCosts {
    pub stanley: f64,
    pub pure_pursuit: f64,
    pub lqr: f64,
    /// Per horizon step and per optimiser sweep.
    pub nmpc: f64,
    pub pid: f64,
    /// Sweep budget of the predictive controller.
    pub nmpc_sweeps: f64,
}

impl Default for StepCosts {
    fn default() -> Self {
        StepCosts { stanley: 2e-3, pure_pursuit: 4e-3, lqr: 6e-3, nmpc: 2e-4, pid: 1e-3, nmpc_sweeps: 200.0 }
    }
}

impl StepCosts {
    pub fn per_step(&self, params: &ParamSet) -> f64 {
        match (&params.family, &params.kind) {
            (_, ParamsKind::Nmpc(p)) => self.nmpc * p.horizon as f64 * self.nmpc_sweeps,
            (Family::Stanley, _) => self.stanley,
            (Family::PurePursuit, _) => self.pure_pursuit,
            (Family::Lqr, _) => self.lqr,
            (Family::Nmpc, _) => self.nmpc * self.nmpc_sweeps,
            (Family::Pid, _) => self.pid,
        }
    }
}

/// Required operations per second at update frequency `frequency` [Hz].
pub fn computation_model(costs: &StepCosts, params: &ParamSet, frequency: f64) -> f64 {
    costs.per_step(params) * frequency
}
