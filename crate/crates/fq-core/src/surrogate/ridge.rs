//! Linear-in-parameters regressor over random Fourier features.
//!
//! The basis contains a bias, the standardized descriptors themselves (so
//! linear targets are fit exactly), and `n_rff` random cosine features. Both
//! energy and force labels enter one ridge least-squares problem solved in
//! closed form, and the gradient with respect to the inputs is analytic.

use crate::error::{CoreError, Result};
use crate::rng::chacha;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub n_rff: usize,
    /// Lengthscale of the random features in standardized-descriptor units.
    pub lengthscale: f64,
    pub alpha: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            n_rff: 96,
            lengthscale: 1.5,
            alpha: 1e-8,
        }
    }
}

/// A fitted member: weights over [1, x, cos(omega x + b)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub config: RidgeConfig,
    pub seed: u64,
    /// Random frequencies, n_rff rows of dimension d.
    pub omega: Vec<Vec<f64>>,
    pub phase: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RidgeModel {
    pub fn n_inputs(&self) -> usize {
        self.omega.first().map(|r| r.len()).unwrap_or(0)
    }

    fn n_basis(d: usize, n_rff: usize) -> usize {
        1 + d + n_rff
    }

    /// Draw the random basis for dimension `d` (weights still empty).
    pub fn draw(d: usize, config: RidgeConfig, seed: u64) -> Self {
        let mut rng = chacha(seed);
        let scale = 1.0 / config.lengthscale;
        let omega: Vec<Vec<f64>> = (0..config.n_rff)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        // Box-Muller keeps us independent of distribution
                        // crates' internal sampling order.
                        let u1: f64 = rng.random::<f64>().max(1e-12);
                        let u2: f64 = rng.random();
                        scale
                            * (-2.0 * u1.ln()).sqrt()
                            * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect()
            })
            .collect();
        let phase: Vec<f64> = (0..config.n_rff)
            .map(|_| rng.random::<f64>() * 2.0 * std::f64::consts::PI)
            .collect();
        Self {
            config,
            seed,
            omega,
            phase,
            weights: vec![],
        }
    }

    /// Basis evaluation at standardized descriptors.
    fn basis(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut out = Vec::with_capacity(Self::n_basis(d, self.config.n_rff));
        out.push(1.0);
        out.extend_from_slice(x);
        let norm = (2.0 / self.config.n_rff.max(1) as f64).sqrt();
        for m in 0..self.config.n_rff {
            let arg: f64 = self.omega[m]
                .iter()
                .zip(x.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + self.phase[m];
            out.push(norm * arg.cos());
        }
        out
    }

    /// Gradient of each basis function with respect to the inputs,
    /// `n_basis x d`.
    fn basis_grad(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let nb = Self::n_basis(d, self.config.n_rff);
        let mut g = DMatrix::<f64>::zeros(nb, d);
        for i in 0..d {
            g[(1 + i, i)] = 1.0;
        }
        let norm = (2.0 / self.config.n_rff.max(1) as f64).sqrt();
        for m in 0..self.config.n_rff {
            let arg: f64 = self.omega[m]
                .iter()
                .zip(x.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + self.phase[m];
            let s = -norm * arg.sin();
            for i in 0..d {
                g[(1 + d + m, i)] = s * self.omega[m][i];
            }
        }
        g
    }

    /// Fit on standardized features/targets.
    ///
    /// `energy_rows`: (features, target) pairs. `force_rows`: per sample a
    /// matrix `d(feature)/d(input coordinate)` already mapped into
    /// standardized-feature space plus the force targets (see caller), each
    /// contributing one row per coordinate with weight `force_weight`.
    pub fn fit(
        &mut self,
        energy_rows: &[(Vec<f64>, f64)],
        force_rows: &[(Vec<f64>, DMatrix<f64>, Vec<f64>)],
        force_weight: f64,
    ) -> Result<()> {
        if energy_rows.is_empty() {
            return Err(CoreError::Training("no training rows".into()));
        }
        let d = energy_rows[0].0.len();
        let nb = Self::n_basis(d, self.config.n_rff);
        let n_force: usize = force_rows.iter().map(|(_, j, _)| j.ncols()).sum();
        let n_rows = energy_rows.len() + n_force;
        let mut a = DMatrix::<f64>::zeros(n_rows, nb);
        let mut y = DVector::<f64>::zeros(n_rows);
        for (r, (x, t)) in energy_rows.iter().enumerate() {
            let phi = self.basis(x);
            for (c, v) in phi.iter().enumerate() {
                a[(r, c)] = *v;
            }
            y[r] = *t;
        }
        let mut r = energy_rows.len();
        let w = force_weight.sqrt();
        for (x, jac, targets) in force_rows {
            // Row for coordinate c: sum_m w_m (basis_grad^T jac)[m, c].
            let bg = self.basis_grad(x); // nb x d
            let rows = bg * jac; // nb x n_coords
            for c in 0..jac.ncols() {
                for m in 0..nb {
                    a[(r, m)] = w * rows[(m, c)];
                }
                y[r] = w * targets[c];
                r += 1;
            }
        }
        let ata = a.transpose() * &a
            + DMatrix::<f64>::identity(nb, nb) * self.config.alpha;
        let aty = a.transpose() * y;
        let chol = Cholesky::new(ata)
            .ok_or_else(|| CoreError::Training("normal equations not positive definite".into()))?;
        self.weights = chol.solve(&aty).iter().cloned().collect();
        Ok(())
    }

    /// Prediction and input-gradient at standardized features.
    pub fn predict_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let phi = self.basis(x);
        let e: f64 = phi
            .iter()
            .zip(self.weights.iter())
            .map(|(p, w)| p * w)
            .sum();
        let bg = self.basis_grad(x);
        let mut grad = vec![0.0; x.len()];
        for (g, gi) in grad.iter_mut().enumerate() {
            *gi = (0..self.weights.len())
                .map(|m| self.weights[m] * bg[(m, g)])
                .sum();
        }
        (e, grad)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let phi = self.basis(x);
        phi.iter()
            .zip(self.weights.iter())
            .map(|(p, w)| p * w)
            .sum()
    }
}
