//! Exponential-averaging (single-step perturbation) estimator.

use crate::error::{CoreError, Result};
use crate::stats::logsumexp;

/// `delta_f = -ln < exp(-delta_u) >` over samples of the reduced potential
/// difference, evaluated with a log-sum-exp to survive large magnitudes.
pub fn zwanzig_estimate(delta_u: &[f64]) -> Result<f64> {
    if delta_u.is_empty() {
        return Err(CoreError::EmptyInput("zwanzig_estimate"));
    }
    let neg: Vec<f64> = delta_u.iter().map(|d| -d).collect();
    Ok(-(logsumexp(&neg) - (delta_u.len() as f64).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chacha;
    use crate::stats::{bootstrap_se, mean};
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_shift_is_exact() {
        let c = 3.7;
        let xs = vec![c; 100];
        assert!((zwanzig_estimate(&xs).unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn survives_huge_magnitudes() {
        let xs = vec![900.0, 900.0];
        assert!((zwanzig_estimate(&xs).unwrap() - 900.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_identity() {
        // For delta_u ~ N(mu, s^2): delta_f = mu - s^2/2. With mu = 1,
        // s^2 = 2 the estimate converges to 0.
        let mut rng = chacha(21);
        let dist = Normal::new(1.0, 2.0f64.sqrt()).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| dist.sample(&mut rng)).collect();
        let est = zwanzig_estimate(&xs).unwrap();
        let se = bootstrap_se(&mut rng, &xs, 200, |s| zwanzig_estimate(s).unwrap());
        assert!(
            est.abs() < 3.0 * se,
            "estimate {est} (se {se}) should be 0"
        );
        assert!(mean(&xs) > 0.5, "sanity: mean(delta_u) is near 1");
    }

    #[test]
    fn antisymmetry_on_exact_enumeration() {
        // Discretized two-state system: with exact Boltzmann-weighted
        // enumeration the estimator reduces to -ln(Z_b/Z_a) and is exactly
        // antisymmetric under exchanging the states.
        let grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.02).collect();
        let u_a: Vec<f64> = grid.iter().map(|x| 0.5 * x * x).collect();
        let u_b: Vec<f64> = grid.iter().map(|x| 2.0 * (x - 0.3) * (x - 0.3)).collect();
        // Weighted Zwanzig over an exact enumeration of state A:
        // delta_f = -ln( sum exp(-u_b) / sum exp(-u_a) ).
        let weighted = |ua: &[f64], ub: &[f64]| -> f64 {
            let neg_b: Vec<f64> = ub.iter().map(|u| -u).collect();
            let neg_a: Vec<f64> = ua.iter().map(|u| -u).collect();
            -(crate::stats::logsumexp(&neg_b) - crate::stats::logsumexp(&neg_a))
        };
        let fwd = weighted(&u_a, &u_b);
        let bwd = weighted(&u_b, &u_a);
        assert!((fwd + bwd).abs() < 1e-12, "fwd {fwd}, bwd {bwd}");
    }
}
