//! Kinematic single-track vehicle, noisy intermittent measurements,
//! reference paths and the extended Kalman filter.

mod ekf;
mod noise;
mod path;
mod trace;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ekf::{covariance_rk4, frozen_covariance_sequence, jacobian, Ekf};
pub use noise::{GaussianSampler, Measurement, NoiseSpec, NoiseStreams};
pub use path::{make_path, CurvatureLevel, PathConfig, PathKind, PathSample, PathSpec};
pub use trace::{write_path_csv, write_trace_csv, TraceRow};

pub type Vector5 = SVector<f64, 5>;
pub type Matrix5 = SMatrix<f64, 5, 5>;

/// Speeds below this are treated as this value wherever v divides.
pub const LOW_SPEED_GUARD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("steering angle {0} rad at the singularity |delta| >= pi/2")]
    Singularity(f64),
    #[error("covariance lost positive semi-definiteness")]
    NotPsd,
    #[error("infeasible path: {0}")]
    InfeasiblePath(String),
    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),
    #[error("io: {0}")]
    Io(String),
}

/// Rear-axle pose, steering angle and rear speed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub delta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64, delta: f64, v: f64) -> Self {
        VehicleState { x, y, theta, delta, v }
    }

    pub fn to_vector(&self) -> Vector5 {
        Vector5::new(self.x, self.y, self.theta, self.delta, self.v)
    }

    pub fn from_vector(s: &Vector5) -> Self {
        VehicleState::new(s[0], s[1], s[2], s[3], s[4])
    }
}

/// Steering rate and rear acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v_s: f64,
    pub a_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 2.7,
            delta_min: -0.6,
            delta_max: 0.6,
            rate_min: -1.0,
            rate_max: 1.0,
            v_min: 0.0,
            v_max: 30.0,
            a_min: -6.0,
            a_max: 4.0,
        }
    }
}

impl VehicleParams {
    pub fn clamp_input(&self, u: ControlInput) -> ControlInput {
        ControlInput { v_s: u.v_s.clamp(self.rate_min, self.rate_max), a_r: u.a_r.clamp(self.a_min, self.a_max) }
    }

    pub fn clamp_delta(&self, delta: f64) -> f64 {
        delta.clamp(self.delta_min, self.delta_max)
    }

    fn clamp_state(&self, s: &mut Vector5) {
        s[3] = s[3].clamp(self.delta_min, self.delta_max);
        s[4] = s[4].clamp(self.v_min, self.v_max);
    }
}

/// Right-hand side of the kinematic single-track model.
pub fn dynamics_derivative(s: &Vector5, u: &ControlInput, wheelbase: f64) -> Result<Vector5, PlantError> {
    let (theta, delta, v) = (s[2], s[3], s[4]);
    if delta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(PlantError::Singularity(delta));
    }
    Ok(Vector5::new(v * theta.cos(), v * theta.sin(), v * delta.tan() / wheelbase, u.v_s, u.a_r))
}

/// One RK4 step of the noiseless dynamics.
pub fn rk4(s: &Vector5, u: &ControlInput, dt: f64, wheelbase: f64) -> Result<Vector5, PlantError> {
    let k1 = dynamics_derivative(s, u, wheelbase)?;
    let k2 = dynamics_derivative(&(s + k1 * (dt / 2.0)), u, wheelbase)?;
    let k3 = dynamics_derivative(&(s + k2 * (dt / 2.0)), u, wheelbase)?;
    let k4 = dynamics_derivative(&(s + k3 * dt), u, wheelbase)?;
    Ok(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Clamps the input, integrates, adds the process-noise increment, clamps the state.
pub fn step(
    s: &VehicleState,
    u: &ControlInput,
    dt: f64,
    params: &VehicleParams,
    noise_increment: &Vector5,
) -> Result<VehicleState, PlantError> {
    let u = params.clamp_input(*u);
    let mut next = rk4(&s.to_vector(), &u, dt, params.wheelbase)? + noise_increment;
    params.clamp_state(&mut next);
    Ok(VehicleState::from_vector(&next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontWheel {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub omega: f64,
}

pub fn front_wheel(s: &VehicleState, wheelbase: f64) -> Result<FrontWheel, PlantError> {
    if s.delta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(PlantError::Singularity(s.delta));
    }
    let v = s.v / s.delta.cos();
    Ok(FrontWheel {
        x: s.x + wheelbase * s.theta.cos(),
        y: s.y + wheelbase * s.theta.sin(),
        v,
        omega: v * s.delta.sin() / wheelbase,
    })
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}
