use nalgebra::RowVector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lqr::LqrScheduler;
use super::{
    fit_window, lqr_command, nmpc, pid_speed, pure_pursuit, stanley, tracking_error, ControlError, LqrParams,
    NmpcParams, PidParams, PidState, PurePursuitParams, RefPoint, StanleyParams,
};
use crate::plant::{
    step, ControlInput, Ekf, Matrix5, NoiseSpec, NoiseStreams, PathSpec, TraceRow, VehicleParams, VehicleState,
    LOW_SPEED_GUARD,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LateralController {
    Stanley(StanleyParams),
    PurePursuit(PurePursuitParams),
    Lqr(LqrParams),
    Nmpc(NmpcParams),
}

impl LateralController {
    pub fn family(&self) -> &'static str {
        match self {
            LateralController::Stanley(_) => "stanley",
            LateralController::PurePursuit(_) => "pure_pursuit",
            LateralController::Lqr(_) => "lqr",
            LateralController::Nmpc(_) => "nmpc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerChoice {
    pub lateral: LateralController,
    /// Its target speed is replaced by the task's.
    pub pid: PidParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub path: PathSpec,
    pub v_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Update period of the geometric controllers and LQR [s].
    pub control_period: f64,
    /// Update period of the predictive controller [s].
    pub nmpc_period: f64,
    /// Initial covariance is this multiple of the identity.
    pub p0_scale: f64,
    /// Runs whose lateral error exceeds this are failed [m].
    pub max_lateral_error: f64,
    /// Weight of |a_r| in the discomfort integral [s/m].
    pub discomfort_weight: f64,
    pub vehicle: VehicleParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            t_max: 60.0,
            control_period: 0.01,
            nmpc_period: 0.05,
            p0_scale: 1e-2,
            max_lateral_error: 20.0,
            discomfort_weight: 1.0,
            vehicle: VehicleParams::default(),
        }
    }
}

/// Time integrals of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub e_p_tot: f64,
    pub delta_tot: f64,
    pub speed_err_tot: f64,
    pub steering_rate_tot: f64,
    pub accel_tot: f64,
    pub discomfort: f64,
    pub duration: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 7] =
        ["e_p_tot", "delta_tot", "speed_err_tot", "steering_rate_tot", "accel_tot", "discomfort", "duration"];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.e_p_tot,
            self.delta_tot,
            self.speed_err_tot,
            self.steering_rate_tot,
            self.accel_tot,
            self.discomfort,
            self.duration,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Metrics {
            e_p_tot: a[0],
            delta_tot: a[1],
            speed_err_tot: a[2],
            steering_rate_tot: a[3],
            accel_tot: a[4],
            discomfort: a[5],
            duration: a[6],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES.iter().position(|n| *n == name).map(|i| self.to_array()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub metrics: Metrics,
    pub steps: usize,
    /// The front axle reached the end of the path before the time limit.
    pub completed: bool,
    pub nmpc_budget_exhausted: usize,
    pub goal_held: usize,
    pub regularized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

enum LateralState {
    Plain,
    Lqr(LqrScheduler),
}

/// Vehicle pose that puts the front axle on the path start, aligned, at speed `v`.
pub fn initial_state(path: &PathSpec, v: f64, wheelbase: f64) -> VehicleState {
    let p = &path.samples[0];
    VehicleState::new(p.x - wheelbase * p.heading.cos(), p.y - wheelbase * p.heading.sin(), p.heading, 0.0, v)
}

/// One closed-loop run: estimate, control, record metrics on the true state,
/// step the plant, then predict and update the filter.
pub fn run_closed_loop(
    choice: &ControllerChoice,
    task: &Task,
    noise: &NoiseSpec,
    config: &SimConfig,
    record_trace: bool,
) -> Result<RunOutcome, ControlError> {
    let vp = &config.vehicle;
    let l = vp.wheelbase;
    let dt = config.dt;
    let bounds = (vp.delta_min, vp.delta_max);
    let pid = PidParams { v_t: task.v_t, ..choice.pid };
    let path = &task.path;
    let period = match choice.lateral {
        LateralController::Nmpc(_) => config.nmpc_period,
        _ => config.control_period,
    };
    let every = ((period / dt).round() as usize).max(1);
    let mut lat_state = match choice.lateral {
        LateralController::Lqr(_) => LateralState::Lqr(LqrScheduler::default()),
        _ => LateralState::Plain,
    };

    let mut s = initial_state(path, task.v_t, l);
    let mut ekf = Ekf::new(s.to_vector(), Matrix5::identity() * config.p0_scale);
    let mut streams = NoiseStreams::new(noise, dt);
    let (w, v) = (noise.w_matrix(), noise.v_matrix());
    let mut pid_state = PidState::default();
    let mut delta_cmd = 0.0;
    let mut m = Metrics::default();
    let mut out = RunOutcome {
        metrics: m,
        steps: 0,
        completed: false,
        nmpc_budget_exhausted: 0,
        goal_held: 0,
        regularized: false,
        trace: record_trace.then(Vec::new),
    };
    let max_steps = (config.t_max / dt).round() as usize;
    let end = path.length();
    for k in 0..max_steps {
        let e_true = tracking_error(&s, path, RefPoint::FrontAxle, l);
        if e_true.s >= end {
            out.completed = true;
            break;
        }
        if e_true.e_p.abs() > config.max_lateral_error {
            return Err(ControlError::Diverged(e_true.e_p));
        }
        let s_hat = VehicleState::from_vector(&ekf.s_hat);
        if k % every == 0 {
            delta_cmd = match (&choice.lateral, &mut lat_state) {
                (LateralController::Stanley(p), _) => {
                    let e = tracking_error(&s_hat, path, RefPoint::FrontAxle, l);
                    stanley(&e, front_speed(&s_hat), p, bounds)
                }
                (LateralController::PurePursuit(p), _) => {
                    let o = pure_pursuit(&s_hat, path, p, l, bounds);
                    out.goal_held += o.goal_held as usize;
                    o.delta
                }
                (LateralController::Lqr(p), LateralState::Lqr(sched)) => {
                    let e = tracking_error(&s_hat, path, RefPoint::Rear, l);
                    let gain: RowVector2<f64> = sched.gain(s_hat.v, l, p)?;
                    lqr_command(&gain, e.e_p, e.theta_e, bounds)
                }
                (LateralController::Lqr(_), LateralState::Plain) => unreachable!("LQR runs carry a scheduler"),
                (LateralController::Nmpc(p), _) => {
                    let e = tracking_error(&s_hat, path, p.ref_point, l);
                    let v_f = front_speed(&s_hat);
                    let window = (v_f * p.horizon as f64 * p.step).max(2.0) + 1.0;
                    let fit = fit_window(&s_hat, path, p.ref_point, l, p.path_approx, window);
                    let o = nmpc(&e, &fit, v_f, p, l, bounds);
                    out.nmpc_budget_exhausted += o.budget_exhausted as usize;
                    o.u0
                }
            };
        }
        let a_r = pid_speed(&mut pid_state, s_hat.v, &pid, dt, (vp.a_min, vp.a_max));
        let u = vp.clamp_input(ControlInput { v_s: (delta_cmd - s_hat.delta) / dt, a_r });

        m.e_p_tot += dt * e_true.e_p.abs();
        m.delta_tot += dt * s.delta.abs();
        m.speed_err_tot += dt * (task.v_t - s.v).abs();
        m.steering_rate_tot += dt * u.v_s.abs();
        m.accel_tot += dt * u.a_r.abs();
        m.duration += dt;
        if let Some(tr) = out.trace.as_mut() {
            tr.push(trace_row(k as f64 * dt, &s, &ekf, &u, e_true.e_p, e_true.theta_e));
        }

        s = step(&s, &u, dt, vp, &streams.process_increment())?;
        ekf.predict(&u, dt, &w, vp)?;
        let y = streams.measure(&s.to_vector());
        if let (Some(tr), crate::plant::Measurement::Dropped) = (out.trace.as_mut(), &y) {
            if let Some(last) = tr.last_mut() {
                last.dropped = true;
            }
        }
        ekf.update(&y, &v);
        out.steps += 1;
    }
    m.discomfort = m.steering_rate_tot + config.discomfort_weight * m.accel_tot;
    out.metrics = m;
    out.regularized = ekf.regularized;
    Ok(out)
}

fn front_speed(s: &VehicleState) -> f64 {
    (s.v / s.delta.cos()).max(LOW_SPEED_GUARD)
}

fn trace_row(t: f64, s: &VehicleState, ekf: &Ekf, u: &ControlInput, e_p: f64, theta_e: f64) -> TraceRow {
    let h = &ekf.s_hat;
    let p = &ekf.p;
    TraceRow {
        t,
        x: s.x,
        y: s.y,
        theta: s.theta,
        delta: s.delta,
        v: s.v,
        x_hat: h[0],
        y_hat: h[1],
        theta_hat: h[2],
        delta_hat: h[3],
        v_hat: h[4],
        p_x: p[(0, 0)],
        p_y: p[(1, 1)],
        p_theta: p[(2, 2)],
        p_delta: p[(3, 3)],
        p_v: p[(4, 4)],
        v_s: u.v_s,
        a_r: u.a_r,
        e_p,
        theta_e,
        dropped: false,
    }
}

/// Mean and standard error of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo aggregate over the successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub mean: Metrics,
    pub std_err: Metrics,
    pub runs: usize,
    pub failed: usize,
    pub incomplete: usize,
}

impl SimOutcome {
    pub fn summary(&self, metric: &str) -> Option<MetricSummary> {
        Some(MetricSummary { mean: self.mean.get(metric)?, std_err: self.std_err.get(metric)? })
    }
}

/// Runs `runs` repetitions with seeds `base_seed + i`, in parallel; the result
/// does not depend on the thread count.
pub fn monte_carlo(
    choice: &ControllerChoice,
    task: &Task,
    noise: &NoiseSpec,
    config: &SimConfig,
    runs: usize,
    base_seed: u64,
) -> SimOutcome {
    let results: Vec<Result<RunOutcome, ControlError>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let spec = NoiseSpec { seed: base_seed.wrapping_add(i as u64), ..noise.clone() };
            run_closed_loop(choice, task, &spec, config, false)
        })
        .collect();
    let ok: Vec<&RunOutcome> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n = ok.len();
    let mut mean = [0.0; 7];
    let mut se = [0.0; 7];
    if n > 0 {
        for r in &ok {
            for (m, x) in mean.iter_mut().zip(r.metrics.to_array()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        if n > 1 {
            for r in &ok {
                for ((s, x), m) in se.iter_mut().zip(r.metrics.to_array()).zip(mean) {
                    *s += (x - m) * (x - m);
                }
            }
            se.iter_mut().for_each(|s| *s = (*s / (n - 1) as f64).sqrt() / (n as f64).sqrt());
        }
    }
    SimOutcome {
        mean: Metrics::from_array(mean),
        std_err: Metrics::from_array(se),
        runs: n,
        failed: runs - n,
        incomplete: ok.iter().filter(|r| !r.completed).count(),
    }
}
