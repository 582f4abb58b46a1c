//! Free-energy differences: multistate reweighting (MBAR) over a lambda
//! schedule, exponential averaging, overlap diagnostics, the telescoped
//! binding cycle, and nonequilibrium switching estimators.
//!
//! All free energies are dimensionless (`f = beta G`) unless a function says
//! otherwise; the report layer divides by beta and applies unit scales.

mod driver;
mod mbar;
mod neq;
mod zwanzig;

pub use driver::{fep_run, FepConfig, FepOutcome, RefineConfig, SnapshotPlan, WindowResult};
pub use mbar::{
    evaluate_reduced_potentials, mbar_solve, overlap_diagnostic, refine_schedule, MbarOptions,
    MbarResult, ReducedPotentialMatrix,
};
pub use neq::{
    crooks_bar_estimate, jarzynski_estimate, neq_switch, read_work_records_csv,
    write_work_records_csv, BarEstimate, Direction, SwitchParams, WorkAudit, WorkRecord,
};
pub use zwanzig::zwanzig_estimate;

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// A value with a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// Difference with errors combined in quadrature.
    pub fn sub(&self, other: &Estimate) -> Estimate {
        Estimate {
            value: self.value - other.value,
            stderr: self.stderr.hypot(other.stderr),
        }
    }
}

/// Strictly monotone coupling schedule with endpoints exactly 1 and 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaSchedule {
    values: Vec<f64>,
}

impl LambdaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "schedule needs at least two windows".into(),
            ));
        }
        let first = values[0];
        let last = *values.last().expect("non-empty");
        let decreasing = first == 1.0 && last == 0.0;
        let increasing = first == 0.0 && last == 1.0;
        if !decreasing && !increasing {
            return Err(CoreError::InvalidArgument(format!(
                "schedule endpoints must be exactly 1 and 0, got {first} .. {last}"
            )));
        }
        for w in values.windows(2) {
            let ok = if decreasing { w[0] > w[1] } else { w[0] < w[1] };
            if !ok {
                return Err(CoreError::InvalidArgument(format!(
                    "schedule must be strictly monotone, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the fully-coupled (lambda = 1) window.
    pub fn coupled_index(&self) -> usize {
        self.values
            .iter()
            .position(|&v| v == 1.0)
            .expect("validated endpoints")
    }

    /// Index of the decoupled (lambda = 0) window.
    pub fn decoupled_index(&self) -> usize {
        self.values
            .iter()
            .position(|&v| v == 0.0)
            .expect("validated endpoints")
    }
}

impl TryFrom<Vec<f64>> for LambdaSchedule {
    type Error = CoreError;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LambdaSchedule> for Vec<f64> {
    fn from(s: LambdaSchedule) -> Vec<f64> {
        s.values
    }
}

/// Sum of per-window free-energy differences with quadrature error.
pub fn telescope_sum(window_deltas: &[Estimate]) -> Result<Estimate> {
    if window_deltas.is_empty() {
        return Err(CoreError::EmptyInput("telescope_sum"));
    }
    let total = window_deltas.iter().map(|e| e.value).sum();
    let var: f64 = window_deltas.iter().map(|e| e.stderr * e.stderr).sum();
    Ok(Estimate::new(total, var.sqrt()))
}

/// Tier label on a binding-cycle row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TierLabel {
    #[serde(rename = "MM")]
    Mm,
    #[serde(rename = "MM+ML1")]
    MmMl1,
    #[serde(rename = "MM+ML2")]
    MmMl2,
}

impl TierLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TierLabel::Mm => "MM",
            TierLabel::MmMl1 => "MM+ML1",
            TierLabel::MmMl2 => "MM+ML2",
        }
    }
}

/// Closed thermodynamic cycle for solvated binding.
///
/// Sign convention: decoupling free energies are `G(lambda=0) - G(lambda=1)`;
/// both legs are passed in the binding direction (complex leg =
/// negative decoupling), so negative `dg_binding` means binding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingCycleResult {
    pub dg_complex_leg: Estimate,
    pub dg_ligand_solvation: Estimate,
    pub dg_binding: Estimate,
    pub tier: TierLabel,
}

/// `dG_binding = dG_partial_binding - dG_ligand_solvation`, errors combined
/// in quadrature.
pub fn binding_cycle(
    dg_partial_binding: Estimate,
    dg_ligand_solvation: Estimate,
    tier: TierLabel,
) -> BindingCycleResult {
    BindingCycleResult {
        dg_complex_leg: dg_partial_binding,
        dg_ligand_solvation,
        dg_binding: dg_partial_binding.sub(&dg_ligand_solvation),
        tier,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telescope_sums_values_and_errors() {
        let total = telescope_sum(&[
            Estimate::new(1.0, 0.0),
            Estimate::new(2.0, 0.0),
            Estimate::new(-0.5, 0.0),
        ])
        .unwrap();
        assert_eq!(total.value, 2.5);
        assert_eq!(total.stderr, 0.0);
    }

    #[test]
    fn telescope_single_window_is_identity() {
        let e = telescope_sum(&[Estimate::new(0.7, 0.2)]).unwrap();
        assert_eq!(e.value, 0.7);
        assert_eq!(e.stderr, 0.2);
    }

    #[test]
    fn telescope_errors_combine_in_quadrature() {
        let e = telescope_sum(&[Estimate::new(0.0, 3.0), Estimate::new(0.0, 4.0)]).unwrap();
        assert!((e.stderr - 5.0).abs() < 1e-12);
    }

    #[test]
    fn binding_cycle_arithmetic() {
        let r = binding_cycle(
            Estimate::new(-20.0, 1.0),
            Estimate::new(-5.0, 0.0),
            TierLabel::Mm,
        );
        assert!((r.dg_binding.value + 15.0).abs() < 1e-12);
        assert!((r.dg_binding.stderr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binding_cycle_zeros() {
        let r = binding_cycle(
            Estimate::new(0.0, 0.0),
            Estimate::new(0.0, 0.0),
            TierLabel::Mm,
        );
        assert_eq!(r.dg_binding.value, 0.0);
    }

    #[test]
    fn binding_cycle_invariant_holds() {
        let r = binding_cycle(
            Estimate::new(-3.25, 0.4),
            Estimate::new(1.5, 0.3),
            TierLabel::MmMl2,
        );
        assert_eq!(
            r.dg_binding.value,
            r.dg_complex_leg.value - r.dg_ligand_solvation.value
        );
    }

    #[test]
    fn schedule_requires_exact_endpoints() {
        assert!(LambdaSchedule::new(vec![1.0, 0.5, 0.0]).is_ok());
        assert!(LambdaSchedule::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(LambdaSchedule::new(vec![0.9, 0.5, 0.0]).is_err());
        assert!(LambdaSchedule::new(vec![1.0, 0.5, 0.1]).is_err());
        assert!(LambdaSchedule::new(vec![1.0, 0.5, 0.5, 0.0]).is_err());
    }
}
