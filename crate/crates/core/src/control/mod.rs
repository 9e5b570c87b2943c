//! Lateral and longitudinal control laws, tracking errors and the
//! closed-loop Monte Carlo simulator.

mod closed_loop;
mod geometric;
mod lqr;
mod nmpc;
mod pid;
mod tracking;

use thiserror::Error;

use crate::plant::PlantError;

pub use closed_loop::{
    initial_state, monte_carlo, run_closed_loop, ControllerChoice, LateralController, MetricSummary, Metrics,
    RunOutcome, SimConfig, SimOutcome, Task,
};
pub use geometric::{
    goal_in_vehicle_frame, pure_pursuit, pure_pursuit_law, stanley, stanley_law, PurePursuitOutput, PurePursuitParams,
    StanleyParams,
};
pub use lqr::{
    care_residual, closed_loop_real_parts, error_model, lqr_command, lqr_gain, solve_care, LqrParams, LqrScheduler,
    LqrSolution,
};
pub use nmpc::{fit_window, nmpc, nmpc_cost, nmpc_grid, NmpcOutput, NmpcParams, PathApprox, PathFit};
pub use pid::{pid_speed, PidParams, PidState};
pub use tracking::{tracking_error, tracking_error_at, RefPoint, TrackingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid controller parameters: {0}")]
    InvalidParams(String),
    #[error("Riccati iteration did not converge (residual {residual:e})")]
    Riccati { residual: f64 },
    #[error("lateral error {0} m exceeded the divergence bound")]
    Diverged(f64),
    #[error(transparent)]
    Plant(#[from] PlantError),
}
