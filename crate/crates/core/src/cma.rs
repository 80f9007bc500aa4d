//! CMA-ES with cumulative step-size adaptation and rank-1 + rank-mu
//! covariance updates, in maximization form (candidates are sorted by
//! fitness descending). Strategy constants follow the standard tutorial
//! formulae: mu = lambda/2 with log-decreasing recombination weights.
//!
//! Sampling draws from a caller-supplied stream, so the state transition is
//! a pure function of (state, stream) and runs resume bit-identically from
//! a serialized checkpoint.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative floor applied to covariance eigenvalues during factorization.
const EIGENVALUE_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum CmaError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("covariance degenerated: {0}")]
    Degenerate(String),
    #[error("candidate {index} has non-finite fitness {value}")]
    NonFiniteFitness { index: usize, value: f64 },
    #[error("expected {expected} candidates of dimension {dim}, got {got}")]
    DimensionMismatch {
        expected: usize,
        dim: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: DVector<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c1: f64,
    c_mu: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: u32,
}

impl CmaEs {
    /// Fresh state: identity covariance, zero evolution paths.
    pub fn new(initial_mean: &[f64], sigma0: f64, lambda: usize) -> Result<Self, CmaError> {
        let dim = initial_mean.len();
        if dim == 0 {
            return Err(CmaError::BadParams("dimension must be positive".into()));
        }
        if lambda < 2 {
            return Err(CmaError::BadParams(format!("population {lambda} < 2")));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(CmaError::BadParams(format!(
                "sigma0 {sigma0} must be positive"
            )));
        }
        if initial_mean.iter().any(|m| !m.is_finite()) {
            return Err(CmaError::BadParams("initial mean must be finite".into()));
        }

        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights = DVector::from_iterator(mu, raw.iter().map(|w| w / sum));
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
        let c_mu =
            (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff)).min(1.0 - c1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        Ok(CmaEs {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
            mean: DVector::from_column_slice(initial_mean),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            p_sigma: DVector::zeros(dim),
            p_c: DVector::zeros(dim),
            generation: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Eigendecomposition of the covariance with the relative eigenvalue
    /// floor applied. Returns (eigenvectors, floored eigenvalues).
    fn factorize(&self) -> Result<(DMatrix<f64>, DVector<f64>), CmaError> {
        let eigen = nalgebra::SymmetricEigen::new(self.cov.clone());
        let max = eigen
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() || max <= 0.0 {
            return Err(CmaError::Degenerate(format!("max eigenvalue {max}")));
        }
        let floor = EIGENVALUE_FLOOR * max;
        let vals = eigen.eigenvalues.map(|v| v.max(floor));
        Ok((eigen.eigenvectors, vals))
    }

    /// Samples lambda candidates mean + sigma * N(0, C) from the stream.
    /// Deterministic given the stream; does not mutate the state.
    pub fn ask(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, CmaError> {
        let (vecs, vals) = self.factorize()?;
        let scale = DMatrix::from_diagonal(&vals.map(f64::sqrt));
        let transform = &vecs * scale;
        let mut out = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z =
                DVector::from_iterator(self.dim, (0..self.dim).map(|_| StandardNormal.sample(rng)));
            let x = &self.mean + self.sigma * &transform * z;
            out.push(x.iter().copied().collect());
        }
        Ok(out)
    }

    /// Rank-based update from evaluated candidates; higher fitness is
    /// better. Ties rank in candidate order, so the update is a
    /// deterministic function of its inputs.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<(), CmaError> {
        if candidates.len() != self.lambda || fitness.len() != self.lambda {
            return Err(CmaError::DimensionMismatch {
                expected: self.lambda,
                dim: self.dim,
                got: candidates.len().min(fitness.len()),
            });
        }
        for (i, c) in candidates.iter().enumerate() {
            if c.len() != self.dim {
                return Err(CmaError::DimensionMismatch {
                    expected: self.lambda,
                    dim: self.dim,
                    got: c.len(),
                });
            }
            if !fitness[i].is_finite() {
                return Err(CmaError::NonFiniteFitness {
                    index: i,
                    value: fitness[i],
                });
            }
        }

        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| {
            fitness[b]
                .partial_cmp(&fitness[a])
                .expect("finite fitness")
                .then(a.cmp(&b))
        });

        let old_mean = self.mean.clone();
        let mut new_mean = DVector::zeros(self.dim);
        for (w_idx, &cand) in order.iter().take(self.mu).enumerate() {
            let x = DVector::from_column_slice(&candidates[cand]);
            new_mean += self.weights[w_idx] * x;
        }
        let mean_step = (&new_mean - &old_mean) / self.sigma;

        let (vecs, vals) = self.factorize()?;
        let inv_sqrt = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
        let cov_inv_sqrt = &vecs * inv_sqrt * vecs.transpose();

        self.p_sigma = (1.0 - self.c_sigma) * &self.p_sigma
            + (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt()
                * &cov_inv_sqrt
                * &mean_step;

        let p_sigma_norm = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - self.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma =
            if p_sigma_norm / decay.sqrt() < (1.4 + 2.0 / (self.dim as f64 + 1.0)) * self.chi_n {
                1.0
            } else {
                0.0
            };

        self.p_c = (1.0 - self.c_c) * &self.p_c
            + h_sigma * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt() * &mean_step;

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w_idx, &cand) in order.iter().take(self.mu).enumerate() {
            let y = (DVector::from_column_slice(&candidates[cand]) - &old_mean) / self.sigma;
            rank_mu += self.weights[w_idx] * &y * y.transpose();
        }

        let delta_h = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c);
        self.cov = (1.0 - self.c1 - self.c_mu + self.c1 * delta_h) * &self.cov
            + self.c1 * &self.p_c * self.p_c.transpose()
            + self.c_mu * rank_mu;
        // Exact symmetry: averaging c_ij with c_ji is commutative.
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((self.c_sigma / self.d_sigma) * (p_sigma_norm / self.chi_n - 1.0)).exp();
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CmaError::Degenerate(format!("sigma became {}", self.sigma)));
        }

        self.mean = new_mean;
        self.generation += 1;
        Ok(())
    }

    /// Largest absolute asymmetry |c_ij - c_ji|; exercised by tests.
    pub fn covariance_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.cov[(i, j)] - self.cov[(j, i)]).abs());
            }
        }
        worst
    }

    /// Smallest covariance eigenvalue (before flooring).
    pub fn min_eigenvalue(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.cov.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}
