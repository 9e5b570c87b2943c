use super::{dynamics_derivative, rk4, ControlInput, Matrix5, Measurement, PlantError, Vector5, VehicleParams};

/// Jacobian of the single-track dynamics with respect to the state.
pub fn jacobian(s: &Vector5, wheelbase: f64) -> Matrix5 {
    let (theta, delta, v) = (s[2], s[3], s[4]);
    let c = delta.cos();
    let mut f = Matrix5::zeros();
    f[(0, 2)] = -v * theta.sin();
    f[(0, 4)] = theta.cos();
    f[(1, 2)] = v * theta.cos();
    f[(1, 4)] = theta.sin();
    f[(2, 3)] = v / (wheelbase * c * c);
    f[(2, 4)] = delta.tan() / wheelbase;
    f
}

fn sym(p: &Matrix5) -> Matrix5 {
    (p + p.transpose()) * 0.5
}

/// RK4 step of `P' = F P + P F^T + W` with `F` given at the start, midpoint
/// (twice) and end of the step.
pub fn covariance_rk4(p: &Matrix5, f: [&Matrix5; 4], w: &Matrix5, dt: f64) -> Matrix5 {
    let rhs = |f: &Matrix5, p: &Matrix5| f * p + p * f.transpose() + w;
    let k1 = rhs(f[0], p);
    let k2 = rhs(f[1], &sym(&(p + k1 * (dt / 2.0))));
    let k3 = rhs(f[2], &sym(&(p + k2 * (dt / 2.0))));
    let k4 = rhs(f[3], &sym(&(p + k3 * dt)));
    sym(&(p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)))
}

/// Jacobians at the four RK4 stage states of `s` under `u`.
fn stage_jacobians(s: &Vector5, u: &ControlInput, dt: f64, l: f64) -> Result<[Matrix5; 4], PlantError> {
    let k1 = dynamics_derivative(s, u, l)?;
    let s2 = s + k1 * (dt / 2.0);
    let k2 = dynamics_derivative(&s2, u, l)?;
    let s3 = s + k2 * (dt / 2.0);
    let k3 = dynamics_derivative(&s3, u, l)?;
    let s4 = s + k3 * dt;
    Ok([jacobian(s, l), jacobian(&s2, l), jacobian(&s3, l), jacobian(&s4, l)])
}

fn is_psd(p: &Matrix5) -> bool {
    (p + Matrix5::identity() * 1e-9).cholesky().is_some()
}

/// Kalman measurement update; returns the gain and whether `P + V` had to be regularised.
fn kalman_update(p: &Matrix5, v: &Matrix5) -> (Matrix5, Matrix5, bool) {
    let s = p + v;
    let (inv, regularized) = match s.try_inverse() {
        Some(i) if i.iter().all(|x| x.is_finite()) => (i, false),
        _ => {
            let r = s + Matrix5::identity() * 1e-12;
            (r.try_inverse().unwrap_or_else(Matrix5::zeros), true)
        }
    };
    let k = p * inv;
    let p_new = sym(&((Matrix5::identity() - k) * p));
    (k, p_new, regularized)
}

/// Extended Kalman filter over the full five-dimensional state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ekf {
    pub s_hat: Vector5,
    pub p: Matrix5,
    /// Jacobian at the last prediction's starting estimate.
    pub f: Matrix5,
    /// Gain of the last performed update.
    pub k: Matrix5,
    /// Set once any update needed regularisation of `P + V`.
    pub regularized: bool,
}

impl Ekf {
    pub fn new(s_hat: Vector5, p: Matrix5) -> Self {
        Ekf { s_hat, p, f: Matrix5::zeros(), k: Matrix5::zeros(), regularized: false }
    }

    pub fn predict(
        &mut self,
        u: &ControlInput,
        dt: f64,
        w: &Matrix5,
        params: &VehicleParams,
    ) -> Result<(), PlantError> {
        let u = params.clamp_input(*u);
        let fs = stage_jacobians(&self.s_hat, &u, dt, params.wheelbase)?;
        self.f = fs[0];
        self.s_hat = rk4(&self.s_hat, &u, dt, params.wheelbase)?;
        self.s_hat[3] = params.clamp_delta(self.s_hat[3]);
        self.p = covariance_rk4(&self.p, [&fs[0], &fs[1], &fs[2], &fs[3]], w, dt);
        if !is_psd(&self.p) || self.p.iter().any(|x| !x.is_finite()) {
            return Err(PlantError::NotPsd);
        }
        Ok(())
    }

    /// Identity when the observation was dropped.
    pub fn update(&mut self, y: &Measurement, v: &Matrix5) {
        if let Measurement::Observed(y) = y {
            let (k, p, reg) = kalman_update(&self.p, v);
            let mut innov = y - self.s_hat;
            innov[2] = super::wrap_angle(innov[2]);
            self.s_hat += k * innov;
            self.p = p;
            self.k = k;
            self.regularized |= reg;
        }
    }
}

/// Covariance sequence with Jacobians frozen along a reference trajectory.
///
/// `reference[k]` and `inputs[k]` drive step `k`; `observed[k]` says whether
/// the measurement after that step is used. Returns `P` after each update.
pub fn frozen_covariance_sequence(
    reference: &[Vector5],
    inputs: &[ControlInput],
    dt: f64,
    wheelbase: f64,
    p0: &Matrix5,
    w: &Matrix5,
    v: &Matrix5,
    observed: &[bool],
) -> Result<Vec<Matrix5>, PlantError> {
    let mut p = *p0;
    let mut out = Vec::with_capacity(reference.len());
    for ((s, u), &obs) in reference.iter().zip(inputs).zip(observed) {
        let fs = stage_jacobians(s, u, dt, wheelbase)?;
        p = covariance_rk4(&p, [&fs[0], &fs[1], &fs[2], &fs[3]], w, dt);
        if obs {
            p = kalman_update(&p, v).1;
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParams {
        VehicleParams { wheelbase: 1.0, ..Default::default() }
    }

    #[test]
    fn zero_noise_zero_covariance_stays_zero() {
        let mut e = Ekf::new(Vector5::new(0.0, 0.0, 0.3, 0.1, 5.0), Matrix5::zeros());
        for _ in 0..100 {
            e.predict(&ControlInput { v_s: 0.1, a_r: 0.2 }, 0.01, &Matrix5::zeros(), &params()).unwrap();
        }
        assert_eq!(e.p, Matrix5::zeros());
    }

    #[test]
    fn straight_jacobian_closed_form() {
        let f = jacobian(&Vector5::new(0.0, 0.0, 0.0, 0.0, 2.0), 1.5);
        let mut expect = Matrix5::zeros();
        expect[(0, 4)] = 1.0;
        expect[(1, 2)] = 2.0;
        expect[(2, 3)] = 2.0 / 1.5;
        assert_eq!(f, expect);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = Vector5::new(1.0, -2.0, 0.7, 0.2, 6.0);
        let f = jacobian(&s, 2.7);
        let u = ControlInput::default();
        for j in 0..5 {
            let h = 1e-6;
            let mut sp = s;
            sp[j] += h;
            let mut sm = s;
            sm[j] -= h;
            let col =
                (dynamics_derivative(&sp, &u, 2.7).unwrap() - dynamics_derivative(&sm, &u, 2.7).unwrap()) / (2.0 * h);
            for i in 0..5 {
                assert!((col[i] - f[(i, j)]).abs() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn first_order_covariance_growth() {
        let dt = 1e-3;
        let mut e = Ekf::new(Vector5::new(0.0, 0.0, 0.0, 0.0, 1.0), Matrix5::zeros());
        e.predict(&ControlInput::default(), dt, &Matrix5::identity(), &params()).unwrap();
        let diff = e.p - Matrix5::identity() * dt;
        assert!(diff.abs().max() < 1e-6, "{}", diff.abs().max());
    }

    #[test]
    fn straight_prediction_grows_trace() {
        let mut e = Ekf::new(Vector5::new(0.0, 0.0, 0.0, 0.0, 8.0), Matrix5::identity() * 0.1);
        let w = Matrix5::from_diagonal(&Vector5::new(0.01, 0.01, 4e-4, 4e-4, 0.01));
        let mut tr = e.p.trace();
        for _ in 0..500 {
            e.predict(&ControlInput::default(), 0.01, &w, &params()).unwrap();
            assert!(e.p.trace() >= tr);
            tr = e.p.trace();
        }
    }

    #[test]
    fn scalar_update() {
        let mut e = Ekf::new(Vector5::zeros(), Matrix5::identity());
        e.update(&Measurement::Observed(Vector5::repeat(2.0)), &Matrix5::identity());
        assert!((e.k - Matrix5::identity() * 0.5).abs().max() < 1e-15);
        assert!((e.p - Matrix5::identity() * 0.5).abs().max() < 1e-15);
        assert!((e.s_hat[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dropped_is_identity() {
        let mut e = Ekf::new(Vector5::repeat(1.0), Matrix5::identity() * 3.0);
        let before = e.clone();
        e.update(&Measurement::Dropped, &Matrix5::identity());
        assert_eq!(e, before);
    }

    #[test]
    fn huge_measurement_noise_is_ignored() {
        let p = Matrix5::from_diagonal(&Vector5::new(1.0, 2.0, 0.5, 0.1, 3.0));
        let mut e = Ekf::new(Vector5::zeros(), p);
        e.update(&Measurement::Observed(Vector5::repeat(1.0)), &(Matrix5::identity() * 1e12));
        assert!(e.k.abs().max() < 1e-6);
        for i in 0..5 {
            assert!(((e.p[(i, i)] - p[(i, i)]) / p[(i, i)]).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_sum_is_regularised() {
        let mut e = Ekf::new(Vector5::zeros(), Matrix5::zeros());
        e.update(&Measurement::Observed(Vector5::repeat(1.0)), &Matrix5::zeros());
        assert!(e.regularized);
        assert!(e.p.iter().all(|x| x.is_finite()));
    }
}
