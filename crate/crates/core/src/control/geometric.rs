use serde::{Deserialize, Serialize};

use super::{ControlError, TrackingError};
use crate::plant::{PathSpec, VehicleState, LOW_SPEED_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanleyParams {
    pub g: f64,
}

impl StanleyParams {
    pub fn new(g: f64) -> Result<Self, ControlError> {
        if g <= 0.0 || !g.is_finite() {
            return Err(ControlError::InvalidParams(format!("Stanley gain {g} must be positive")));
        }
        Ok(StanleyParams { g })
    }
}

/// `delta = theta_e + atan(g e_p / v_f)` in the control frame, clamped to `bounds`.
pub fn stanley(e: &TrackingError, v_f: f64, params: &StanleyParams, bounds: (f64, f64)) -> f64 {
    let (e_p, theta_e) = e.control_frame();
    stanley_law(e_p, theta_e, v_f, params.g, bounds)
}

pub fn stanley_law(e_p: f64, theta_e: f64, v_f: f64, g: f64, bounds: (f64, f64)) -> f64 {
    let v = v_f.max(LOW_SPEED_GUARD);
    (theta_e + (g * e_p / v).atan()).clamp(bounds.0, bounds.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurePursuitParams {
    pub lookahead: f64,
}

impl PurePursuitParams {
    pub fn new(lookahead: f64) -> Result<Self, ControlError> {
        if lookahead <= 0.0 || !lookahead.is_finite() {
            return Err(ControlError::InvalidParams(format!("lookahead {lookahead} must be positive")));
        }
        Ok(PurePursuitParams { lookahead })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurePursuitOutput {
    pub delta: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub goal: (f64, f64),
    pub goal_index: usize,
    /// Goal position in the rear-axle frame: ahead, and to the left.
    pub e_along: f64,
    pub e_lat: f64,
    /// The lookahead ran past the path end and the last sample was used.
    pub goal_held: bool,
}

/// Goal position relative to the rear axle in the vehicle frame.
pub fn goal_in_vehicle_frame(s: &VehicleState, goal: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (goal.0 - s.x, goal.1 - s.y);
    let (c, sn) = (s.theta.cos(), s.theta.sin());
    (c * dx + sn * dy, -sn * dx + c * dy)
}

pub fn pure_pursuit_law(alpha: f64, wheelbase: f64, lookahead: f64, bounds: (f64, f64)) -> f64 {
    (2.0 * wheelbase * alpha.sin() / lookahead).atan().clamp(bounds.0, bounds.1)
}

pub fn pure_pursuit(
    s: &VehicleState,
    path: &PathSpec,
    params: &PurePursuitParams,
    wheelbase: f64,
    bounds: (f64, f64),
) -> PurePursuitOutput {
    let near = path.nearest_index(s.x, s.y);
    let target = path.samples[near].s + params.lookahead;
    let found = path.samples[near..].iter().position(|p| p.s >= target).map(|k| k + near);
    let goal_index = found.unwrap_or(path.samples.len() - 1);
    let g = &path.samples[goal_index];
    let (e_along, e_lat) = goal_in_vehicle_frame(s, (g.x, g.y));
    let alpha = e_lat.atan2(e_along);
    PurePursuitOutput {
        delta: pure_pursuit_law(alpha, wheelbase, params.lookahead, bounds),
        alpha,
        kappa: 2.0 * alpha.sin() / params.lookahead,
        goal: (g.x, g.y),
        goal_index,
        e_along,
        e_lat,
        goal_held: found.is_none(),
    }
}
