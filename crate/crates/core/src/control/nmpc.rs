use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ControlError, RefPoint, TrackingError};
use crate::plant::{PathSpec, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathApprox {
    #[default]
    Linear,
    Quadratic,
    Cubic,
}

impl PathApprox {
    pub fn degree(self) -> usize {
        match self {
            PathApprox::Linear => 1,
            PathApprox::Quadratic => 2,
            PathApprox::Cubic => 3,
        }
    }
}

fn default_step() -> f64 {
    0.05
}

fn default_ref_point() -> RefPoint {
    RefPoint::CenterOfGravity
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmpcParams {
    /// Row-major symmetric 2x2 error weight.
    pub q: [[f64; 2]; 2],
    pub r: f64,
    pub horizon: usize,
    #[serde(default)]
    pub path_approx: PathApprox,
    #[serde(default = "default_ref_point")]
    pub ref_point: RefPoint,
    /// Prediction step [s].
    #[serde(default = "default_step")]
    pub step: f64,
}

impl NmpcParams {
    pub fn new(q: [[f64; 2]; 2], r: f64, horizon: usize) -> Result<Self, ControlError> {
        let p = NmpcParams {
            q,
            r,
            horizon,
            path_approx: PathApprox::Linear,
            ref_point: default_ref_point(),
            step: default_step(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidParams(m.to_string()));
        if self.horizon == 0 {
            return bad("NMPC horizon must be at least one step");
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return bad("NMPC input weight must be positive");
        }
        if !(self.step > 0.0) {
            return bad("NMPC prediction step must be positive");
        }
        if self.ref_point == RefPoint::FrontAxle {
            return bad("NMPC reference point must be the rear axle or the centre of gravity");
        }
        let [[a, b], [c, d]] = self.q;
        if b != c || a < 0.0 || d < 0.0 || a * d - b * c < 0.0 {
            return bad("NMPC error weight must be symmetric PSD");
        }
        Ok(())
    }
}

/// Polynomial `y = sum c_j x^j` of the path in the frame of the reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFit {
    pub coeffs: Vec<f64>,
    /// Largest forward coordinate covered by the window.
    pub reach: f64,
}

impl PathFit {
    pub fn straight() -> Self {
        PathFit { coeffs: vec![0.0, 0.0], reach: f64::INFINITY }
    }

    /// Signed curvature at forward coordinate `x`, clamped to the fitted window.
    pub fn curvature(&self, x: f64) -> f64 {
        if self.coeffs.len() < 3 {
            return 0.0;
        }
        let x = x.clamp(0.0, self.reach.max(0.0));
        let (mut d1, mut d2) = (0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let jf = j as f64;
            d1 += jf * c * x.powi(j as i32 - 1);
            if j >= 2 {
                d2 += jf * (jf - 1.0) * c * x.powi(j as i32 - 2);
            }
        }
        d2 / (1.0 + d1 * d1).powf(1.5)
    }
}

/// Least-squares fit of the path ahead of the reference point over `length` metres.
pub fn fit_window(
    s: &VehicleState,
    path: &PathSpec,
    ref_point: RefPoint,
    wheelbase: f64,
    approx: PathApprox,
    length: f64,
) -> PathFit {
    let (px, py) = ref_point.position(s, wheelbase);
    let (c, sn) = (s.theta.cos(), s.theta.sin());
    let start = path.nearest_index(px, py);
    let s0 = path.samples[start].s;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in &path.samples[start..] {
        if p.s - s0 > length && xs.len() > approx.degree() {
            break;
        }
        // stop before the window folds back on itself in the vehicle frame
        if crate::plant::wrap_angle(p.heading - s.theta).abs() > 1.2 {
            break;
        }
        let (dx, dy) = (p.x - px, p.y - py);
        xs.push(c * dx + sn * dy);
        ys.push(-sn * dx + c * dy);
    }
    let degree = approx.degree().min(xs.len().saturating_sub(1));
    if degree < 2 {
        return PathFit::straight();
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(&ys);
    match a.svd(true, true).solve(&b, 1e-12) {
        Ok(sol) => PathFit { coeffs: sol.iter().copied().collect(), reach: xs.iter().cloned().fold(0.0, f64::max) },
        Err(_) => PathFit::straight(),
    }
}

/// Prediction problem in the control frame.
#[derive(Debug, Clone)]
struct Problem {
    e0: (f64, f64),
    kappa: Vec<f64>,
    v_f: f64,
    q: [f64; 3],
    r: f64,
    h: f64,
    l: f64,
    bounds: (f64, f64),
}

impl Problem {
    fn new(e0: (f64, f64), fit: &PathFit, v_f: f64, params: &NmpcParams, wheelbase: f64, bounds: (f64, f64)) -> Self {
        let h = params.step;
        Problem {
            e0,
            kappa: (0..params.horizon).map(|k| fit.curvature(v_f * h * k as f64)).collect(),
            v_f,
            q: [params.q[0][0], params.q[0][1], params.q[1][1]],
            r: params.r,
            h,
            l: wheelbase,
            bounds,
        }
    }

    fn n(&self) -> usize {
        self.kappa.len()
    }

    /// Advances one step, returning the new error and the stage cost.
    fn stage(&self, e: (f64, f64), u: f64, k: usize) -> ((f64, f64), f64) {
        let (su, cu) = u.sin_cos();
        let de = self.v_f * (e.1 - u).sin();
        let dth = self.kappa[k] * self.v_f * cu - self.v_f * su / self.l;
        let n = (e.0 + self.h * de, e.1 + self.h * dth);
        let c = self.q[0] * n.0 * n.0 + 2.0 * self.q[1] * n.0 * n.1 + self.q[2] * n.1 * n.1 + self.r * u * u;
        (n, c)
    }

    fn cost(&self, u: &[f64]) -> f64 {
        let mut e = self.e0;
        let mut total = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            let (n, c) = self.stage(e, uk, k);
            e = n;
            total += c;
        }
        total
    }
}

/// Input sequence with cached intermediate errors and prefix costs, so that
/// changing input `j` only re-simulates from step `j`.
struct Rollout<'a> {
    p: &'a Problem,
    u: Vec<f64>,
    e: Vec<(f64, f64)>,
    prefix: Vec<f64>,
}

impl<'a> Rollout<'a> {
    fn new(p: &'a Problem, u: Vec<f64>) -> Self {
        let n = p.n();
        let mut r = Rollout { p, u, e: vec![p.e0; n + 1], prefix: vec![0.0; n + 1] };
        r.rebuild(0);
        r
    }

    fn rebuild(&mut self, from: usize) {
        for k in from..self.p.n() {
            let (n, c) = self.p.stage(self.e[k], self.u[k], k);
            self.e[k + 1] = n;
            self.prefix[k + 1] = self.prefix[k] + c;
        }
    }

    fn total(&self) -> f64 {
        self.prefix[self.p.n()]
    }

    fn try_value(&self, j: usize, value: f64) -> f64 {
        let mut e = self.e[j];
        let mut total = self.prefix[j];
        for k in j..self.p.n() {
            let (n, c) = self.p.stage(e, if k == j { value } else { self.u[k] }, k);
            e = n;
            total += c;
        }
        total
    }

    fn set(&mut self, j: usize, value: f64) {
        self.u[j] = value;
        self.rebuild(j);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcOutput {
    pub u0: f64,
    pub sequence: Vec<f64>,
    pub cost: f64,
    /// The sweep budget ran out before the step size shrank below tolerance.
    pub budget_exhausted: bool,
}

const SWEEPS: usize = 200;
const INITIAL_STEP: f64 = 0.1;
const MIN_STEP: f64 = 1e-6;
const RESTARTS: [f64; 3] = [0.0, 0.1, -0.1];

fn compass(p: &Problem, start: f64) -> (Vec<f64>, f64, bool) {
    let start = start.clamp(p.bounds.0, p.bounds.1);
    let mut r = Rollout::new(p, vec![start; p.n()]);
    let mut step = INITIAL_STEP;
    let mut sweeps = 0;
    while step >= MIN_STEP && sweeps < SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for j in 0..p.n() {
            for dir in [1.0, -1.0] {
                let cand = (r.u[j] + dir * step).clamp(p.bounds.0, p.bounds.1);
                if cand != r.u[j] && r.try_value(j, cand) < r.total() {
                    r.set(j, cand);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    let total = r.total();
    (r.u, total, step >= MIN_STEP)
}

/// Evaluates the horizon cost of an input sequence.
pub fn nmpc_cost(
    e0: &TrackingError,
    fit: &PathFit,
    v_f: f64,
    params: &NmpcParams,
    wheelbase: f64,
    bounds: (f64, f64),
    u: &[f64],
) -> f64 {
    Problem::new(e0.control_frame(), fit, v_f, params, wheelbase, bounds).cost(u)
}

/// Multi-start coordinate (compass) search over the input sequence; the
/// first restart wins ties.
pub fn nmpc(
    e0: &TrackingError,
    fit: &PathFit,
    v_f: f64,
    params: &NmpcParams,
    wheelbase: f64,
    bounds: (f64, f64),
) -> NmpcOutput {
    let p = Problem::new(e0.control_frame(), fit, v_f, params, wheelbase, bounds);
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for start in RESTARTS {
        let run = compass(&p, start);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (u, cost, exhausted) = best.expect("at least one restart");
    NmpcOutput { u0: u[0], sequence: u, cost, budget_exhausted: exhausted }
}

/// Coordinate descent restricted to a sorted input grid: exact minimisation
/// along each coordinate, then moves of one grid index in two coordinates at
/// once, repeated until no move improves.
pub fn nmpc_grid(
    e0: &TrackingError,
    fit: &PathFit,
    v_f: f64,
    params: &NmpcParams,
    wheelbase: f64,
    grid: &[f64],
) -> NmpcOutput {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p = Problem::new(e0.control_frame(), fit, v_f, params, wheelbase, (lo, hi));
    let n = p.n();
    let nearest = |x: f64| {
        (0..grid.len()).min_by(|&a, &b| (grid[a] - x).abs().total_cmp(&(grid[b] - x).abs())).expect("grid not empty")
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut exhausted = false;
    for start in RESTARTS {
        let mut idx = vec![nearest(start); n];
        let mut r = Rollout::new(&p, idx.iter().map(|&i| grid[i]).collect());
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut improved = false;
            for j in 0..n {
                let mut bj = (idx[j], r.total());
                for (g, &val) in grid.iter().enumerate() {
                    let c = r.try_value(j, val);
                    if c < bj.1 {
                        bj = (g, c);
                    }
                }
                if bj.0 != idx[j] {
                    idx[j] = bj.0;
                    r.set(j, grid[bj.0]);
                    improved = true;
                }
            }
            if !improved {
                'pairs: for a in 0..n {
                    for b in a + 1..n {
                        for (da, db) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                            let (ia, ib) = (idx[a] as i64 + da, idx[b] as i64 + db);
                            if ia < 0 || ib < 0 || ia >= grid.len() as i64 || ib >= grid.len() as i64 {
                                continue;
                            }
                            let mut u = r.u.clone();
                            u[a] = grid[ia as usize];
                            u[b] = grid[ib as usize];
                            if p.cost(&u) < r.total() {
                                idx[a] = ia as usize;
                                idx[b] = ib as usize;
                                r = Rollout::new(&p, u);
                                improved = true;
                                break 'pairs;
                            }
                        }
                    }
                }
            }
            if !improved {
                break;
            }
            if sweeps >= SWEEPS {
                exhausted = true;
                break;
            }
        }
        let total = r.total();
        if best.as_ref().is_none_or(|b| total < b.1) {
            best = Some((idx, total));
        }
    }
    let (idx, cost) = best.expect("at least one restart");
    let sequence: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    NmpcOutput { u0: sequence[0], sequence, cost, budget_exhausted: exhausted }
}
