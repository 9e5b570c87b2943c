use serde::{Deserialize, Serialize};

use super::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Target speed [m/s].
    pub v_t: f64,
}

impl PidParams {
    pub fn new(kp: f64, ki: f64, kd: f64, v_t: f64) -> Result<Self, ControlError> {
        if [kp, ki, kd].iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(ControlError::InvalidParams(format!("PID gains ({kp}, {ki}, {kd}) must be non-negative")));
        }
        if !(v_t >= 0.0) {
            return Err(ControlError::InvalidParams(format!("target speed {v_t} must be non-negative")));
        }
        Ok(PidParams { kp, ki, kd, v_t })
    }
}

/// Integral accumulator and the previous sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_err: Option<f64>,
    pub prev_v: Option<f64>,
}

/// Acceleration command from the current speed estimate. The integral is
/// trapezoidal and clamped so that its contribution stays within the bounds;
/// the derivative acts on the measurement.
pub fn pid_speed(state: &mut PidState, v_hat: f64, params: &PidParams, dt: f64, a_bounds: (f64, f64)) -> f64 {
    let err = params.v_t - v_hat;
    if let Some(pe) = state.prev_err {
        state.integral += 0.5 * dt * (err + pe);
    }
    if params.ki > 0.0 {
        state.integral = state.integral.clamp(a_bounds.0 / params.ki, a_bounds.1 / params.ki);
    }
    let deriv = state.prev_v.map_or(0.0, |pv| (v_hat - pv) / dt);
    state.prev_err = Some(err);
    state.prev_v = Some(v_hat);
    (params.kp * err + params.ki * state.integral - params.kd * deriv).clamp(a_bounds.0, a_bounds.1)
}
