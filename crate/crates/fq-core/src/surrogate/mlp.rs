//! One-hidden-layer tanh network trained with Adam.
//!
//! Supports a force loss: the network's input gradient is differentiated
//! analytically with respect to every parameter (hand-rolled double
//! backprop), verified against finite differences in the tests.

use crate::error::{CoreError, Result};
use crate::rng::chacha;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early stopping: stop when the validation RMSE has not improved by
    /// `min_delta` (in units of target std) for `patience` evaluations.
    pub patience: usize,
    pub min_delta: f64,
    /// Epochs between validation evaluations.
    pub eval_every: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 48,
            learning_rate: 3e-3,
            max_epochs: 4000,
            patience: 20,
            min_delta: 1e-4,
            eval_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub seed: u64,
    pub n_inputs: usize,
    /// Hidden weights, `hidden x n_inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    /// Frozen first layer (transfer-learning mode).
    #[serde(default)]
    pub freeze_input_layer: bool,
}

struct Gradients {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl MlpModel {
    pub fn init(n_inputs: usize, config: MlpConfig, seed: u64) -> Self {
        let mut rng = chacha(seed);
        let h = config.hidden;
        let scale1 = (1.0 / n_inputs.max(1) as f64).sqrt();
        let scale2 = (1.0 / h.max(1) as f64).sqrt();
        let mut draw = |scale: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            (rng.random::<f64>() * 2.0 - 1.0) * scale
        };
        let w1 = (0..h * n_inputs).map(|_| draw(scale1, &mut rng)).collect();
        let b1 = (0..h).map(|_| draw(0.1, &mut rng)).collect();
        let w2 = (0..h).map(|_| draw(scale2, &mut rng)).collect();
        Self {
            config,
            seed,
            n_inputs,
            w1,
            b1,
            w2,
            b2: 0.0,
            freeze_input_layer: false,
        }
    }

    fn hidden_acts(&self, x: &[f64]) -> Vec<f64> {
        let h = self.config.hidden;
        let mut t = vec![0.0; h];
        for (k, tk) in t.iter_mut().enumerate() {
            let mut z = self.b1[k];
            for (i, xi) in x.iter().enumerate() {
                z += self.w1[k * self.n_inputs + i] * xi;
            }
            *tk = z.tanh();
        }
        t
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let t = self.hidden_acts(x);
        self.b2
            + t.iter()
                .zip(self.w2.iter())
                .map(|(tk, wk)| tk * wk)
                .sum::<f64>()
    }

    /// Prediction and gradient with respect to the inputs.
    pub fn predict_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let t = self.hidden_acts(x);
        let e = self.b2
            + t.iter()
                .zip(self.w2.iter())
                .map(|(tk, wk)| tk * wk)
                .sum::<f64>();
        let mut grad = vec![0.0; self.n_inputs];
        for k in 0..self.config.hidden {
            let factor = self.w2[k] * (1.0 - t[k] * t[k]);
            for (i, gi) in grad.iter_mut().enumerate() {
                *gi += factor * self.w1[k * self.n_inputs + i];
            }
        }
        (e, grad)
    }

    /// Accumulate loss gradients for one sample.
    ///
    /// Energy term: `(pred - target)^2`. Force term (optional): for each
    /// input `i`, `force_weight * (g_i - g_target_i)^2` where `g = dE/dx`
    /// in standardized input space.
    fn accumulate(
        &self,
        x: &[f64],
        target: f64,
        force_target: Option<&[f64]>,
        force_weight: f64,
        grads: &mut Gradients,
    ) -> f64 {
        let h = self.config.hidden;
        let d = self.n_inputs;
        let t = self.hidden_acts(x);
        let pred = self.b2
            + t.iter()
                .zip(self.w2.iter())
                .map(|(tk, wk)| tk * wk)
                .sum::<f64>();
        let e_err = pred - target;
        let mut loss = e_err * e_err;

        // Plain backprop for the energy term.
        for k in 0..h {
            let sech2 = 1.0 - t[k] * t[k];
            grads.w2[k] += 2.0 * e_err * t[k];
            let dz = 2.0 * e_err * self.w2[k] * sech2;
            grads.b1[k] += dz;
            for i in 0..d {
                grads.w1[k * d + i] += dz * x[i];
            }
        }
        grads.b2 += 2.0 * e_err;

        if let Some(ft) = force_target {
            // g_i = sum_k w2_k sech2_k w1_ki ; e_i = g_i - ft_i.
            let mut g = vec![0.0; d];
            for k in 0..h {
                let f = self.w2[k] * (1.0 - t[k] * t[k]);
                for i in 0..d {
                    g[i] += f * self.w1[k * d + i];
                }
            }
            let err: Vec<f64> = g.iter().zip(ft.iter()).map(|(a, b)| a - b).collect();
            loss += force_weight * err.iter().map(|e| e * e).sum::<f64>();

            for k in 0..h {
                let sech2 = 1.0 - t[k] * t[k];
                let dsech2_dz = -2.0 * t[k] * sech2;
                // dg_i/dw2_k = sech2 * w1_ki
                let mut sum_err_w1 = 0.0;
                for i in 0..d {
                    sum_err_w1 += err[i] * self.w1[k * d + i];
                }
                grads.w2[k] += 2.0 * force_weight * sech2 * sum_err_w1;
                // dg_i/db1_k = w2_k dsech2/dz w1_ki
                let db1 = 2.0 * force_weight * self.w2[k] * dsech2_dz * sum_err_w1;
                grads.b1[k] += db1;
                // dg_i/dw1_kj = w2_k (delta_ij sech2 + dsech2/dz x_j w1_ki)
                for j in 0..d {
                    grads.w1[k * d + j] += 2.0
                        * force_weight
                        * self.w2[k]
                        * (err[j] * sech2 + dsech2_dz * x[j] * sum_err_w1);
                }
            }
        }
        loss
    }

    /// Full-batch Adam on energy (+ optional force) loss with early stopping
    /// on the validation RMSE. Returns (train_rmse, val_rmse) on the
    /// standardized targets.
    pub fn train(
        &mut self,
        train: &[(Vec<f64>, f64, Option<Vec<f64>>)],
        val: &[(Vec<f64>, f64)],
        force_weight: f64,
    ) -> Result<(f64, f64)> {
        if train.is_empty() {
            return Err(CoreError::Training("no training rows".into()));
        }
        let h = self.config.hidden;
        let d = self.n_inputs;
        let n_params = h * d + h + h + 1;
        let mut m = vec![0.0; n_params];
        let mut v = vec![0.0; n_params];
        let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
        let mut best_val = f64::INFINITY;
        let mut best = self.clone();
        let mut strikes = 0usize;

        for epoch in 1..=self.config.max_epochs {
            let mut grads = Gradients {
                w1: vec![0.0; h * d],
                b1: vec![0.0; h],
                w2: vec![0.0; h],
                b2: 0.0,
            };
            for (x, t, f) in train {
                self.accumulate(x, *t, f.as_deref(), force_weight, &mut grads);
            }
            let scale = 1.0 / train.len() as f64;
            let lr = self.config.learning_rate;
            let bias1 = 1.0 - beta1.powi(epoch as i32);
            let bias2 = 1.0 - beta2.powi(epoch as i32);
            let mut idx = 0;
            let mut apply = |param: &mut f64, grad: f64, frozen: bool| {
                let g = grad * scale;
                m[idx] = beta1 * m[idx] + (1.0 - beta1) * g;
                v[idx] = beta2 * v[idx] + (1.0 - beta2) * g * g;
                if !frozen {
                    *param -= lr * (m[idx] / bias1) / ((v[idx] / bias2).sqrt() + eps);
                }
                idx += 1;
            };
            let frozen = self.freeze_input_layer;
            let mut w1 = std::mem::take(&mut self.w1);
            let mut b1 = std::mem::take(&mut self.b1);
            let mut w2 = std::mem::take(&mut self.w2);
            let mut b2 = self.b2;
            for (p, g) in w1.iter_mut().zip(grads.w1.iter()) {
                apply(p, *g, frozen);
            }
            for (p, g) in b1.iter_mut().zip(grads.b1.iter()) {
                apply(p, *g, frozen);
            }
            for (p, g) in w2.iter_mut().zip(grads.w2.iter()) {
                apply(p, *g, false);
            }
            apply(&mut b2, grads.b2, false);
            self.w1 = w1;
            self.b1 = b1;
            self.w2 = w2;
            self.b2 = b2;

            if epoch % self.config.eval_every == 0 || epoch == self.config.max_epochs {
                let val_rmse = if val.is_empty() {
                    self.rmse_train(train)
                } else {
                    self.rmse(val)
                };
                if val_rmse < best_val - self.config.min_delta {
                    best_val = val_rmse;
                    best = self.clone();
                    strikes = 0;
                } else {
                    strikes += 1;
                    if strikes >= self.config.patience {
                        break;
                    }
                }
            }
        }
        *self = best;
        let train_pairs: Vec<(Vec<f64>, f64)> =
            train.iter().map(|(x, t, _)| (x.clone(), *t)).collect();
        Ok((self.rmse(&train_pairs), if val.is_empty() { self.rmse(&train_pairs) } else { self.rmse(val) }))
    }

    fn rmse(&self, rows: &[(Vec<f64>, f64)]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let sum: f64 = rows
            .iter()
            .map(|(x, t)| (self.predict(x) - t).powi(2))
            .sum();
        (sum / rows.len() as f64).sqrt()
    }

    fn rmse_train(&self, rows: &[(Vec<f64>, f64, Option<Vec<f64>>)]) -> f64 {
        let sum: f64 = rows
            .iter()
            .map(|(x, t, _)| (self.predict(x) - t).powi(2))
            .sum();
        (sum / rows.len() as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_gradients_match_finite_differences() {
        let cfg = MlpConfig {
            hidden: 5,
            ..Default::default()
        };
        let model = MlpModel::init(3, cfg, 11);
        let x = vec![0.3, -0.7, 0.2];
        let target = 0.4;
        let ft = vec![0.1, -0.2, 0.05];
        let fw = 0.7;

        let loss_of = |m: &MlpModel| -> f64 {
            let (pred, g) = m.predict_grad(&x);
            let mut l = (pred - target).powi(2);
            l += fw * g
                .iter()
                .zip(ft.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            l
        };

        let mut grads = Gradients {
            w1: vec![0.0; 15],
            b1: vec![0.0; 5],
            w2: vec![0.0; 5],
            b2: 0.0,
        };
        model.accumulate(&x, target, Some(&ft), fw, &mut grads);

        let h = 1e-6;
        let check = |analytic: f64, fd: f64, name: &str| {
            assert!(
                (analytic - fd).abs() < 1e-5 * fd.abs().max(1.0),
                "{name}: analytic {analytic} vs fd {fd}"
            );
        };
        for idx in 0..model.w1.len() {
            let mut p = model.clone();
            let mut q = model.clone();
            p.w1[idx] += h;
            q.w1[idx] -= h;
            check(grads.w1[idx], (loss_of(&p) - loss_of(&q)) / (2.0 * h), "w1");
        }
        for idx in 0..model.b1.len() {
            let mut p = model.clone();
            let mut q = model.clone();
            p.b1[idx] += h;
            q.b1[idx] -= h;
            check(grads.b1[idx], (loss_of(&p) - loss_of(&q)) / (2.0 * h), "b1");
        }
        for idx in 0..model.w2.len() {
            let mut p = model.clone();
            let mut q = model.clone();
            p.w2[idx] += h;
            q.w2[idx] -= h;
            check(grads.w2[idx], (loss_of(&p) - loss_of(&q)) / (2.0 * h), "w2");
        }
        let mut p = model.clone();
        let mut q = model.clone();
        p.b2 += h;
        q.b2 -= h;
        check(grads.b2, (loss_of(&p) - loss_of(&q)) / (2.0 * h), "b2");
    }

    #[test]
    fn learns_a_smooth_function() {
        let cfg = MlpConfig {
            hidden: 24,
            learning_rate: 5e-3,
            max_epochs: 3000,
            ..Default::default()
        };
        let mut model = MlpModel::init(1, cfg, 5);
        let mut rng = chacha(9);
        let rows: Vec<(Vec<f64>, f64, Option<Vec<f64>>)> = (0..200)
            .map(|_| {
                let x = rng.random::<f64>() * 2.0 - 1.0;
                (vec![x], (2.0 * x).sin(), None)
            })
            .collect();
        let val: Vec<(Vec<f64>, f64)> = (0..50)
            .map(|_| {
                let x = rng.random::<f64>() * 2.0 - 1.0;
                (vec![x], (2.0 * x).sin())
            })
            .collect();
        let (_, val_rmse) = model.train(&rows, &val, 0.0).unwrap();
        assert!(val_rmse < 0.05, "val rmse {val_rmse}");
    }
}
