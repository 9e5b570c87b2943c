use nalgebra::{Matrix2, Matrix4, RowVector2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::plant::LOW_SPEED_GUARD;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqrParams {
    /// Row-major symmetric 2x2 state weight.
    pub q: [[f64; 2]; 2],
    pub r: f64,
}

impl LqrParams {
    pub fn new(q: [[f64; 2]; 2], r: f64) -> Result<Self, ControlError> {
        let p = LqrParams { q, r };
        if r <= 0.0 || !r.is_finite() {
            return Err(ControlError::InvalidParams(format!("LQR input weight {r} must be positive")));
        }
        let m = p.q_matrix();
        if (m - m.transpose()).abs().max() > 1e-12 || m.symmetric_eigenvalues().min() < -1e-12 {
            return Err(ControlError::InvalidParams("LQR state weight must be symmetric PSD".into()));
        }
        Ok(p)
    }

    pub fn q_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.q[0][0], self.q[0][1], self.q[1][0], self.q[1][1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrSolution {
    pub s: Matrix2<f64>,
    pub k: RowVector2<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Lateral error model `[e_p, theta_e]` linearised at zero error.
pub fn error_model(v: f64, wheelbase: f64) -> (Matrix2<f64>, Vector2<f64>) {
    (Matrix2::new(0.0, v, 0.0, 0.0), Vector2::new(0.0, v / wheelbase))
}

pub fn care_residual(a: &Matrix2<f64>, b: &Vector2<f64>, q: &Matrix2<f64>, r: f64, s: &Matrix2<f64>) -> f64 {
    (a.transpose() * s + s * a - s * b * b.transpose() * s / r + q).norm()
}

/// Solves `A^T X + X A + C = 0` for symmetric `C`.
fn lyapunov(a: &Matrix2<f64>, c: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    // column-major vec: (I ⊗ A^T + A^T ⊗ I) vec(X) = -vec(C)
    let at = a.transpose();
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                // I ⊗ A^T
                m[(2 * i + j, 2 * i + k)] += at[(j, k)];
                // A^T ⊗ I
                m[(2 * i + j, 2 * k + j)] += at[(i, k)];
            }
        }
    }
    let rhs = -Vector4::new(c[(0, 0)], c[(1, 0)], c[(0, 1)], c[(1, 1)]);
    let x = m.lu().solve(&rhs)?;
    let x = Matrix2::new(x[0], x[2], x[1], x[3]);
    Some((x + x.transpose()) * 0.5)
}

/// Stabilising solution of the continuous algebraic Riccati equation by
/// Newton-Kleinman iteration.
pub fn solve_care(
    a: &Matrix2<f64>,
    b: &Vector2<f64>,
    q: &Matrix2<f64>,
    r: f64,
    k0: RowVector2<f64>,
) -> Result<LqrSolution, ControlError> {
    if q.iter().all(|&x| x == 0.0) {
        return Ok(LqrSolution { s: Matrix2::zeros(), k: RowVector2::zeros(), residual: 0.0, iterations: 0 });
    }
    let mut k = k0;
    let mut s = Matrix2::zeros();
    let mut residual = f64::INFINITY;
    for it in 1..=100 {
        let ac = a - b * k;
        let c = q + k.transpose() * k * r;
        s = lyapunov(&ac, &c).ok_or(ControlError::Riccati { residual })?;
        let next = b.transpose() * s / r;
        residual = care_residual(a, b, q, r, &s);
        let change = (next - k).norm();
        k = next;
        let scale = 1.0 + s.norm();
        if residual < 1e-10 * scale || (change < 1e-14 * (1.0 + k.norm()) && residual < 1e-8) {
            // one more solve with the converged gain tightens the residual
            let ac = a - b * k;
            if let Some(s2) = lyapunov(&ac, &(q + k.transpose() * k * r)) {
                let r2 = care_residual(a, b, q, r, &s2);
                if r2 < residual {
                    s = s2;
                    residual = r2;
                    k = b.transpose() * s / r;
                }
            }
            if residual < 1e-8 {
                return Ok(LqrSolution { s, k, residual, iterations: it });
            }
        }
    }
    if residual < 1e-8 {
        return Ok(LqrSolution { s, k, residual, iterations: 100 });
    }
    Err(ControlError::Riccati { residual })
}

/// Gain for the error model at speed `v`; the initial guess places both poles
/// of the closed loop in the left half plane.
pub fn lqr_gain(v: f64, wheelbase: f64, params: &LqrParams) -> Result<LqrSolution, ControlError> {
    let v = v.max(LOW_SPEED_GUARD);
    let (a, b) = error_model(v, wheelbase);
    let bb = v / wheelbase;
    // characteristic polynomial s^2 + bb k2 s + v bb k1 with bb k2 = 2, v bb k1 = 1
    let k0 = RowVector2::new(1.0 / (v * bb), 2.0 / bb);
    solve_care(&a, &b, &params.q_matrix(), params.r, k0)
}

/// Steering command `-K [e_p, theta_e]`, clamped.
pub fn lqr_command(k: &RowVector2<f64>, e_p: f64, theta_e: f64, bounds: (f64, f64)) -> f64 {
    (-(k[0] * e_p + k[1] * theta_e)).clamp(bounds.0, bounds.1)
}

/// Eigenvalues' real parts of `A - B K`.
pub fn closed_loop_real_parts(v: f64, wheelbase: f64, k: &RowVector2<f64>) -> [f64; 2] {
    let (a, b) = error_model(v, wheelbase);
    let ac = a - b * k;
    let tr = ac.trace();
    let det = ac.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        [tr / 2.0 + disc.sqrt(), tr / 2.0 - disc.sqrt()]
    } else {
        [tr / 2.0, tr / 2.0]
    }
}

/// Holds the last gain when the speed falls under the low-speed guard.
#[derive(Debug, Clone, Default)]
pub struct LqrScheduler {
    last: Option<RowVector2<f64>>,
    cache: Option<(f64, RowVector2<f64>)>,
}

impl LqrScheduler {
    pub fn gain(&mut self, v: f64, wheelbase: f64, params: &LqrParams) -> Result<RowVector2<f64>, ControlError> {
        if v < LOW_SPEED_GUARD {
            if let Some(k) = self.last {
                return Ok(k);
            }
        }
        if let Some((cv, k)) = self.cache {
            if cv == v {
                return Ok(k);
            }
        }
        let k = lqr_gain(v, wheelbase, params)?.k;
        self.last = Some(k);
        self.cache = Some((v, k));
        Ok(k)
    }
}
