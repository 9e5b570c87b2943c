use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Matrix5, PlantError, Vector5};
use crate::order::SymMatrix;

/// Process-noise rate `w`, measurement covariance `v`, Bernoulli drop probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub w: SymMatrix,
    pub v: SymMatrix,
    pub drop_probability: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(w: SymMatrix, v: SymMatrix, drop_probability: f64, seed: u64) -> Result<Self, PlantError> {
        let n = NoiseSpec { w, v, drop_probability, seed };
        n.validate()?;
        Ok(n)
    }

    pub fn zero(seed: u64) -> Self {
        NoiseSpec { w: SymMatrix::zeros(5), v: SymMatrix::zeros(5), drop_probability: 0.0, seed }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        for (name, m) in [("W", &self.w), ("V", &self.v)] {
            if m.dim() != 5 {
                return Err(PlantError::InvalidNoise(format!("{name} must be 5x5")));
            }
            if !m.is_psd() {
                return Err(PlantError::InvalidNoise(format!("{name} is not PSD")));
            }
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(PlantError::InvalidNoise("drop probability outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn w_matrix(&self) -> Matrix5 {
        to_matrix5(&self.w)
    }

    pub fn v_matrix(&self) -> Matrix5 {
        to_matrix5(&self.v)
    }
}

pub(crate) fn to_matrix5(m: &SymMatrix) -> Matrix5 {
    Matrix5::from_fn(|i, j| m.as_matrix()[(i, j)])
}

/// Draws zero-mean Gaussians with a fixed covariance through its symmetric square root.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSampler {
    sqrt: Matrix5,
    zero: bool,
}

impl GaussianSampler {
    pub fn new(cov: &Matrix5) -> Self {
        let eig = SymmetricEigen::new((cov + cov.transpose()) * 0.5);
        let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt = eig.eigenvectors * Matrix5::from_diagonal(&d) * eig.eigenvectors.transpose();
        GaussianSampler { zero: cov.iter().all(|&x| x == 0.0), sqrt }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector5 {
        let z = Vector5::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if self.zero {
            Vector5::zeros()
        } else {
            self.sqrt * z
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    Observed(Vector5),
    Dropped,
}

/// Independent process, measurement and drop streams derived from one seed.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    process: ChaCha8Rng,
    measurement: ChaCha8Rng,
    drop: ChaCha8Rng,
    process_sampler: GaussianSampler,
    measurement_sampler: GaussianSampler,
    drop_probability: f64,
    dt: f64,
}

impl NoiseStreams {
    pub fn new(spec: &NoiseSpec, dt: f64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
            r.set_stream(k);
            r
        };
        NoiseStreams {
            process: stream(1),
            measurement: stream(2),
            drop: stream(3),
            process_sampler: GaussianSampler::new(&(spec.w_matrix() * dt)),
            measurement_sampler: GaussianSampler::new(&spec.v_matrix()),
            drop_probability: spec.drop_probability,
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Process-noise increment with covariance `W dt`.
    pub fn process_increment(&mut self) -> Vector5 {
        self.process_sampler.sample(&mut self.process)
    }

    /// Uniform draw on the drop stream; the observation is dropped when it falls below `p`.
    pub fn drop_uniform(&mut self) -> f64 {
        self.drop.random::<f64>()
    }

    /// Noisy full-state observation, or `Dropped`.
    ///
    /// Both streams advance every call so that runs at different drop
    /// probabilities share the same noise realisations and nested drop sets.
    pub fn measure(&mut self, s: &Vector5) -> Measurement {
        let noise = self.measurement_sampler.sample(&mut self.measurement);
        if self.drop_uniform() < self.drop_probability {
            Measurement::Dropped
        } else {
            Measurement::Observed(s + noise)
        }
    }
}
