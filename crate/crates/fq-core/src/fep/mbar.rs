//! Multistate Bennett acceptance ratio estimator.
//!
//! Solves the self-consistency equations
//!
//! ```text
//! f_k = -ln sum_n exp(-u_kn) / sum_j N_j exp(f_j - u_jn)
//! ```
//!
//! by self-consistent iteration with an adaptive switch to damped Newton
//! steps on the gradient of the convex MBAR objective. Standard errors come
//! from bootstrap resampling within each state's sample block.

use crate::error::{CoreError, Result};
use crate::model::{Surface, ThermoState};
use crate::rng::chacha;
use crate::sampling::Snapshot;
use crate::stats::logsumexp;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The `u_kn` matrix of reduced potentials plus per-state sample counts.
///
/// Row `k` is a thermodynamic state, column `n` a pooled sample;
/// `u_kn = beta * U_k(x_n)` is dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPotentialMatrix {
    u_kn: Array2<f64>,
    counts: Vec<usize>,
}

impl ReducedPotentialMatrix {
    pub fn new(u_kn: Array2<f64>, counts: Vec<usize>) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total != u_kn.ncols() {
            return Err(CoreError::InvalidArgument(format!(
                "counts sum to {total} but the matrix has {} columns",
                u_kn.ncols()
            )));
        }
        if counts.len() != u_kn.nrows() {
            return Err(CoreError::InvalidArgument(format!(
                "{} counts for {} states",
                counts.len(),
                u_kn.nrows()
            )));
        }
        for ((k, n), v) in u_kn.indexed_iter() {
            if !v.is_finite() {
                return Err(CoreError::NonFiniteEnergy { state: k, sample: n });
            }
        }
        Ok(Self { u_kn, counts })
    }

    pub fn n_states(&self) -> usize {
        self.u_kn.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.u_kn.ncols()
    }

    pub fn u_kn(&self) -> &Array2<f64> {
        &self.u_kn
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Evaluate `u_kn = beta * E(x_n; lambda_k)` over per-window snapshot sets.
///
/// Column order is the concatenation of the window sample sets in schedule
/// order. `surfaces` must be indexed like the schedule.
pub fn evaluate_reduced_potentials(
    snapshot_sets: &[Vec<Snapshot>],
    surfaces: &[&dyn Surface],
    state: ThermoState,
) -> Result<ReducedPotentialMatrix> {
    if snapshot_sets.len() != surfaces.len() {
        return Err(CoreError::InvalidArgument(format!(
            "{} snapshot sets for {} surfaces",
            snapshot_sets.len(),
            surfaces.len()
        )));
    }
    for (k, set) in snapshot_sets.iter().enumerate() {
        if set.is_empty() {
            return Err(CoreError::ZeroSamples { state: k });
        }
    }
    let counts: Vec<usize> = snapshot_sets.iter().map(|s| s.len()).collect();
    let n_total: usize = counts.iter().sum();
    let beta = state.beta();
    let mut u = Array2::<f64>::zeros((surfaces.len(), n_total));
    for (k, surface) in surfaces.iter().enumerate() {
        let mut n = 0;
        for set in snapshot_sets {
            for snap in set {
                let e = surface.energy(&snap.coords)?;
                if !e.is_finite() {
                    return Err(CoreError::NonFiniteEnergy { state: k, sample: n });
                }
                u[(k, n)] = beta * e;
                n += 1;
            }
        }
    }
    ReducedPotentialMatrix::new(u, counts)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MbarOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Self-consistent sweeps before Newton steps are attempted.
    pub sc_warmup: usize,
    /// Bootstrap resamples for the standard errors (0 disables).
    pub n_bootstrap: usize,
    pub bootstrap_seed: u64,
}

impl Default for MbarOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            sc_warmup: 10,
            n_bootstrap: 100,
            bootstrap_seed: 0,
        }
    }
}

/// Dimensionless free energies per state, anchored at `f[0] = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MbarResult {
    pub f_k: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub stderr_k: Vec<f64>,
}

impl MbarResult {
    /// Free-energy difference between two states with bootstrap error.
    pub fn delta(&self, from: usize, to: usize) -> crate::fep::Estimate {
        crate::fep::Estimate::new(
            self.f_k[to] - self.f_k[from],
            // Bootstrap stderr_k are relative to the anchor; treat the
            // difference conservatively via quadrature.
            if from == 0 {
                self.stderr_k[to]
            } else if to == 0 {
                self.stderr_k[from]
            } else {
                self.stderr_k[to].hypot(self.stderr_k[from])
            },
        )
    }
}

/// Denominator terms `ln sum_j N_j exp(f_j - u_jn)` for every sample.
fn log_denominators(u_kn: &Array2<f64>, log_counts: &[f64], f: &[f64]) -> Vec<f64> {
    let k_states = u_kn.nrows();
    let n_samples = u_kn.ncols();
    let mut out = vec![0.0; n_samples];
    let mut scratch = vec![0.0; k_states];
    for n in 0..n_samples {
        for k in 0..k_states {
            scratch[k] = log_counts[k] + f[k] - u_kn[(k, n)];
        }
        out[n] = logsumexp(&scratch);
    }
    out
}

/// One self-consistent sweep; returns the updated, anchored f.
fn sc_sweep(u_kn: &Array2<f64>, log_counts: &[f64], f: &[f64]) -> Vec<f64> {
    let log_denom = log_denominators(u_kn, log_counts, f);
    let mut new_f: Vec<f64> = (0..u_kn.nrows())
        .map(|k| {
            let terms: Vec<f64> = (0..u_kn.ncols())
                .map(|n| -u_kn[(k, n)] - log_denom[n])
                .collect();
            -logsumexp(&terms)
        })
        .collect();
    let anchor = new_f[0];
    for v in new_f.iter_mut() {
        *v -= anchor;
    }
    new_f
}

/// Convex MBAR objective (up to a constant); minimized at the solution.
fn objective(u_kn: &Array2<f64>, log_counts: &[f64], counts: &[usize], f: &[f64]) -> f64 {
    let log_denom = log_denominators(u_kn, log_counts, f);
    let sum_denom: f64 = log_denom.iter().sum();
    let weighted: f64 = counts
        .iter()
        .zip(f.iter())
        .map(|(&n, &fk)| n as f64 * fk)
        .sum();
    sum_denom - weighted
}

/// Weight matrix `W_kn = exp(f_k - u_kn - log_denom_n)`.
///
/// Columns sum to 1 against counts; rows sum to 1 at the solution.
fn weight_matrix(u_kn: &Array2<f64>, log_counts: &[f64], f: &[f64]) -> Array2<f64> {
    let log_denom = log_denominators(u_kn, log_counts, f);
    let mut w = Array2::<f64>::zeros(u_kn.raw_dim());
    for ((k, n), w_el) in w.indexed_iter_mut() {
        *w_el = (f[k] - u_kn[(k, n)] - log_denom[n]).exp();
    }
    w
}

fn solve_f(
    u_kn: &Array2<f64>,
    counts: &[usize],
    f_init: &[f64],
    opts: &MbarOptions,
) -> (Vec<f64>, usize, bool) {
    let k_states = u_kn.nrows();
    if k_states == 1 {
        return (vec![0.0], 1, true);
    }
    let log_counts: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let mut f = f_init.to_vec();
    let mut iterations = 0;

    // Warm-up self-consistent sweeps stabilize the Newton region.
    for _ in 0..opts.sc_warmup {
        let new_f = sc_sweep(u_kn, &log_counts, &f);
        iterations += 1;
        let delta = max_abs_diff(&f, &new_f);
        f = new_f;
        if delta < opts.tol {
            return (f, iterations, true);
        }
    }

    while iterations < opts.max_iter {
        // Damped Newton step on the reduced variables f_1..f_{K-1}.
        let w = weight_matrix(u_kn, &log_counts, &f);
        let mut grad = DVector::<f64>::zeros(k_states - 1);
        for k in 1..k_states {
            let row_sum: f64 = w.row(k).sum();
            grad[k - 1] = counts[k] as f64 * (row_sum - 1.0);
        }
        let mut hess = DMatrix::<f64>::zeros(k_states - 1, k_states - 1);
        for k in 1..k_states {
            for l in 1..k_states {
                let mut h = 0.0;
                for n in 0..u_kn.ncols() {
                    let wk = counts[k] as f64 * w[(k, n)];
                    let wl = counts[l] as f64 * w[(l, n)];
                    h -= wk * wl;
                    if k == l {
                        h += wk;
                    }
                }
                hess[(k - 1, l - 1)] = h;
            }
        }

        let newton_ok = match hess.lu().solve(&grad) {
            Some(step) => {
                let obj0 = objective(u_kn, &log_counts, counts, &f);
                let mut scale = 1.0;
                let mut applied = false;
                for _ in 0..12 {
                    let mut trial = f.clone();
                    for k in 1..k_states {
                        trial[k] -= scale * step[k - 1];
                    }
                    if objective(u_kn, &log_counts, counts, &trial) <= obj0 {
                        f = trial;
                        applied = true;
                        break;
                    }
                    scale *= 0.5;
                }
                applied
            }
            None => false,
        };
        iterations += 1;

        // Fall back to (and measure convergence with) a plain SC sweep.
        let new_f = sc_sweep(u_kn, &log_counts, &f);
        iterations += 1;
        let delta = max_abs_diff(&f, &new_f);
        f = new_f;
        if delta < opts.tol {
            return (f, iterations, true);
        }
        if !newton_ok {
            continue;
        }
    }
    (f, iterations, false)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Solve the MBAR equations for the given matrix.
///
/// Non-convergence at `max_iter` yields `converged = false`, not an error;
/// a state with zero samples is an error.
pub fn mbar_solve(matrix: &ReducedPotentialMatrix, opts: &MbarOptions) -> Result<MbarResult> {
    for (k, &n) in matrix.counts.iter().enumerate() {
        if n == 0 {
            return Err(CoreError::ZeroSamples { state: k });
        }
    }
    let f0 = vec![0.0; matrix.n_states()];
    let (f, iterations, converged) = solve_f(&matrix.u_kn, &matrix.counts, &f0, opts);

    let stderr_k = if opts.n_bootstrap >= 2 && matrix.n_states() > 1 {
        bootstrap_stderr(matrix, &f, opts)
    } else {
        vec![0.0; matrix.n_states()]
    };

    Ok(MbarResult {
        f_k: f,
        converged,
        iterations,
        stderr_k,
    })
}

fn bootstrap_stderr(
    matrix: &ReducedPotentialMatrix,
    f_point: &[f64],
    opts: &MbarOptions,
) -> Vec<f64> {
    let mut rng = chacha(opts.bootstrap_seed);
    let k_states = matrix.n_states();
    let mut replicas: Vec<Vec<f64>> = Vec::with_capacity(opts.n_bootstrap);
    // Block offsets per state in the pooled column order.
    let mut offsets = vec![0usize];
    for &c in &matrix.counts {
        offsets.push(offsets.last().unwrap() + c);
    }
    let resample_opts = MbarOptions {
        n_bootstrap: 0,
        max_iter: opts.max_iter,
        ..*opts
    };
    for _ in 0..opts.n_bootstrap {
        let mut cols: Vec<usize> = Vec::with_capacity(matrix.n_samples());
        for k in 0..k_states {
            let (lo, hi) = (offsets[k], offsets[k + 1]);
            for _ in lo..hi {
                cols.push(rng.random_range(lo..hi));
            }
        }
        let u = matrix.u_kn.select(Axis(1), &cols);
        let (f, _, _) = solve_f(&u, &matrix.counts, f_point, &resample_opts);
        replicas.push(f);
    }
    (0..k_states)
        .map(|k| {
            let vals: Vec<f64> = replicas.iter().map(|f| f[k]).collect();
            crate::stats::variance(&vals).sqrt()
        })
        .collect()
}

/// Per-adjacent-pair phase-space overlap in `[0, 1]`.
///
/// Computed from the MBAR weight matrix as the cosine similarity of the two
/// states' weight rows: exactly 1 for identical states, near 0 for disjoint
/// energy distributions, and symmetric in the pair.
pub fn overlap_diagnostic(matrix: &ReducedPotentialMatrix) -> Result<Vec<f64>> {
    if matrix.n_states() < 2 {
        return Err(CoreError::InvalidArgument(
            "overlap needs at least two states".into(),
        ));
    }
    let opts = MbarOptions {
        n_bootstrap: 0,
        ..Default::default()
    };
    let result = mbar_solve(matrix, &opts)?;
    let log_counts: Vec<f64> = matrix.counts.iter().map(|&n| (n as f64).ln()).collect();
    let w = weight_matrix(&matrix.u_kn, &log_counts, &result.f_k);
    let mut overlaps = Vec::with_capacity(matrix.n_states() - 1);
    for k in 0..matrix.n_states() - 1 {
        let a = w.row(k);
        let b = w.row(k + 1);
        let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        overlaps.push(if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (dot / (na * nb)).clamp(0.0, 1.0)
        });
    }
    Ok(overlaps)
}

/// Insert midpoint windows wherever adjacent overlap falls below `threshold`.
///
/// Returns the refined lambda values (still monotone with exact endpoints),
/// or `None` when no refinement is needed.
pub fn refine_schedule(
    lambdas: &[f64],
    overlaps: &[f64],
    threshold: f64,
) -> Option<Vec<f64>> {
    assert_eq!(overlaps.len() + 1, lambdas.len());
    let mut out = Vec::with_capacity(lambdas.len() + overlaps.len());
    let mut refined = false;
    for k in 0..overlaps.len() {
        out.push(lambdas[k]);
        if overlaps[k] < threshold {
            out.push(0.5 * (lambdas[k] + lambdas[k + 1]));
            refined = true;
        }
    }
    out.push(*lambdas.last().unwrap());
    refined.then_some(out)
}
