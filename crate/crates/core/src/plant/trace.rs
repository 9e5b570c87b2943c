use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{PathSpec, PlantError};

/// One time step of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub delta: f64,
    pub v: f64,
    pub x_hat: f64,
    pub y_hat: f64,
    pub theta_hat: f64,
    pub delta_hat: f64,
    pub v_hat: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_theta: f64,
    pub p_delta: f64,
    pub p_v: f64,
    pub v_s: f64,
    pub a_r: f64,
    pub e_p: f64,
    pub theta_e: f64,
    pub dropped: bool,
}

fn io(e: impl std::fmt::Display) -> PlantError {
    PlantError::Io(e.to_string())
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), PlantError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_path_csv<W: Write>(out: W, path: &PathSpec) -> Result<(), PlantError> {
    let mut w = csv::Writer::from_writer(out);
    for p in &path.samples {
        w.serialize(p).map_err(io)?;
    }
    w.flush().map_err(io)
}
