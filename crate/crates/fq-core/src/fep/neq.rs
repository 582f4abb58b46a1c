//! Nonequilibrium switching between two potential surfaces and the
//! fluctuation-theorem estimators over the collected work values.
//!
//! The protocol mixes `U_mix = (1 - s) U_from + s U_to`, sweeping `s` over
//! `switch_steps` increments. Work accumulates as the energy jump at fixed
//! coordinates on every increment; Langevin propagation between increments
//! exchanges heat with the bath, so `W + Q = U_final - U_initial` exactly.

use crate::error::{CoreError, Result};
use crate::fep::Estimate;
use crate::model::{MixedSurface, Surface, ThermoState};
use crate::rng::chacha;
use crate::sampling::{langevin_propagate_at, LangevinParams, Snapshot};
use crate::stats::{bootstrap_se, logsumexp};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

/// One switching realization's work sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkRecord {
    pub direction: Direction,
    /// Accumulated protocol work in reduced energy units.
    pub work: f64,
    pub snapshot_id: String,
    pub protocol_id: String,
    pub seed: u64,
}

/// Energy bookkeeping of one switch: `work + heat = u_final - u_initial`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkAudit {
    pub heat: f64,
    pub u_initial: f64,
    pub u_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchParams {
    /// Number of mixing increments sweeping s from 0 to 1.
    pub switch_steps: usize,
    /// Langevin steps between consecutive increments.
    #[serde(default = "default_steps_per_increment")]
    pub steps_per_increment: usize,
    pub dt: f64,
    pub gamma: f64,
    #[serde(default = "default_energy_bound")]
    pub energy_bound: f64,
}

fn default_steps_per_increment() -> usize {
    1
}
fn default_energy_bound() -> f64 {
    1e8
}

impl SwitchParams {
    fn validate(&self) -> Result<()> {
        if self.switch_steps == 0 {
            return Err(CoreError::InvalidArgument(
                "switch_steps must be >= 1".into(),
            ));
        }
        if !(self.dt > 0.0) || !(self.gamma > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "dt and gamma must be positive, got dt={}, gamma={}",
                self.dt, self.gamma
            )));
        }
        Ok(())
    }
}

/// Run one switching realization and return its work record and energy audit.
///
/// Forward sweeps `s: 0 -> 1` starting from a snapshot equilibrated on
/// `surface_from`; backward sweeps `s: 1 -> 0` starting from a snapshot
/// equilibrated on `surface_to`.
#[allow(clippy::too_many_arguments)]
pub fn neq_switch(
    surface_from: &dyn Surface,
    surface_to: &dyn Surface,
    start: &Snapshot,
    params: &SwitchParams,
    state: ThermoState,
    direction: Direction,
    seed: u64,
    protocol_id: &str,
) -> Result<(WorkRecord, WorkAudit)> {
    params.validate()?;
    let n = params.switch_steps;
    let schedule: Vec<f64> = match direction {
        Direction::Forward => (0..=n).map(|i| i as f64 / n as f64).collect(),
        Direction::Backward => (0..=n).map(|i| 1.0 - i as f64 / n as f64).collect(),
    };

    let mut coords = start.coords.clone();
    let mut work = 0.0;
    let mut heat = 0.0;
    let mix =
        |s: f64| -> MixedSurface<'_> { MixedSurface::new(surface_from, surface_to, s) };
    let u_initial = mix(schedule[0]).energy(&coords)?;
    let mut u_current = u_initial;

    for (i, pair) in schedule.windows(2).enumerate() {
        let (s_cur, s_next) = (pair[0], pair[1]);
        // Instantaneous increment: work is the energy jump at fixed coords,
        // U_mix(s') - U_mix(s) = (s' - s)(U_to - U_from). Evaluating the
        // difference this way keeps identical surfaces at exactly zero work.
        let e_from = surface_from.energy(&coords)?;
        let e_to = surface_to.energy(&coords)?;
        work += (s_next - s_cur) * (e_to - e_from);
        let surface_next = mix(s_next);
        // Same expression MixedSurface::energy uses, so the heat bookkeeping
        // below is bit-consistent with the propagated frame energies.
        let u_next = (1.0 - s_next) * e_from + s_next * e_to;
        u_current = u_next;

        // Relaxation on the new mixed surface: energy change here is heat.
        let lp = LangevinParams {
            dt: params.dt,
            gamma: params.gamma,
            n_steps: params.steps_per_increment,
            n_equil: 0,
            seed: seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64),
            energy_bound: params.energy_bound,
        };
        let traj = langevin_propagate_at(&surface_next, &coords, &lp, state, s_next)?;
        let last = traj.frames.last().expect("n_steps >= 1, n_equil = 0");
        coords = last.coords.clone();
        heat += last.energy - u_current;
        u_current = last.energy;
    }

    Ok((
        WorkRecord {
            direction,
            work,
            snapshot_id: format!("step:{}", start.source_step),
            protocol_id: protocol_id.to_string(),
            seed,
        },
        WorkAudit {
            heat,
            u_initial,
            u_final: u_current,
        },
    ))
}

/// Jarzynski estimator: `dF = -(1/beta) ln < exp(-beta W) >` with bootstrap
/// standard error.
pub fn jarzynski_estimate(
    works: &[f64],
    state: ThermoState,
    n_bootstrap: usize,
    seed: u64,
) -> Result<Estimate> {
    if works.is_empty() {
        return Err(CoreError::EmptyInput("jarzynski_estimate"));
    }
    let beta = state.beta();
    let point = jarzynski_point(works, beta);
    let mut rng = chacha(seed);
    let stderr = if works.len() >= 2 && n_bootstrap >= 2 {
        bootstrap_se(&mut rng, works, n_bootstrap, |w| jarzynski_point(w, beta))
    } else {
        0.0
    };
    Ok(Estimate::new(point, stderr))
}

fn jarzynski_point(works: &[f64], beta: f64) -> f64 {
    let scaled: Vec<f64> = works.iter().map(|w| -beta * w).collect();
    -(logsumexp(&scaled) - (works.len() as f64).ln()) / beta
}

/// Bennett acceptance ratio over paired forward/backward work sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarEstimate {
    pub value: f64,
    pub stderr: f64,
    pub converged: bool,
}

impl BarEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.stderr)
    }
}

/// Solve the BAR self-consistency over forward works (A -> B) and backward
/// works expressed on the forward axis (the negated raw B -> A work, the
/// same sign convention under which the two work histograms cross at
/// `W = dF`). Antisymmetric inputs (`backward[j] = -forward[j]`) therefore
/// give exactly `dF = 0`.
pub fn crooks_bar_estimate(
    forward: &[f64],
    backward: &[f64],
    state: ThermoState,
    n_bootstrap: usize,
    seed: u64,
) -> Result<BarEstimate> {
    if forward.is_empty() || backward.is_empty() {
        return Err(CoreError::EmptyInput("crooks_bar_estimate"));
    }
    let beta = state.beta();
    let (value, converged) = bar_solve(forward, backward, beta);

    let mut stderr = 0.0;
    if n_bootstrap >= 2 && forward.len() >= 2 && backward.len() >= 2 {
        let mut rng = chacha(seed);
        let mut replicas = Vec::with_capacity(n_bootstrap);
        use rand::Rng;
        for _ in 0..n_bootstrap {
            let f: Vec<f64> = (0..forward.len())
                .map(|_| forward[rng.random_range(0..forward.len())])
                .collect();
            let b: Vec<f64> = (0..backward.len())
                .map(|_| backward[rng.random_range(0..backward.len())])
                .collect();
            replicas.push(bar_solve(&f, &b, beta).0);
        }
        stderr = crate::stats::variance(&replicas).sqrt();
    }
    Ok(BarEstimate {
        value,
        stderr,
        converged,
    })
}

/// Monotone root solve of the BAR estimating equation with conjugated
/// backward works `b_j` (negated raw reverse work):
/// `sum_i sigma(-(M + beta (w_i - dF))) = sum_j sigma(-(-M - beta (b_j - dF)))`
/// with `M = ln(n_f / n_b)`.
fn bar_solve(forward: &[f64], backward: &[f64], beta: f64) -> (f64, bool) {
    let m = (forward.len() as f64 / backward.len() as f64).ln();
    let g = |df: f64| -> f64 {
        let a: f64 = forward
            .iter()
            .map(|&w| sigmoid(-(m + beta * (w - df))))
            .sum();
        let b: f64 = backward
            .iter()
            .map(|&w| sigmoid(-(-m - beta * (w - df))))
            .sum();
        a - b
    };
    // g is strictly increasing in df; bracket then bisect.
    let scale = forward
        .iter()
        .chain(backward.iter())
        .map(|w| w.abs())
        .fold(1.0, f64::max);
    let mut lo = -scale - 10.0 / beta;
    let mut hi = scale + 10.0 / beta;
    for _ in 0..60 {
        if g(lo) < 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..60 {
        if g(hi) > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        // Hopelessly one-sided work sets; report midpoint, flag it.
        return (0.5 * (lo + hi), false);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * scale.max(1.0) {
            break;
        }
    }
    (0.5 * (lo + hi), true)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `work_records.csv`: header `direction,work,seed,snapshot_id`.
pub fn write_work_records_csv(path: &Path, records: &[WorkRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "direction,work,seed,snapshot_id")?;
    for r in records {
        writeln!(out, "{},{:.17e},{},{}", r.direction, r.work, r.seed, r.snapshot_id)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_work_records_csv(path: &Path) -> Result<Vec<WorkRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, ',').collect();
        if fields.len() != 4 {
            return Err(CoreError::Parse {
                line: idx + 1,
                message: "expected 4 fields".into(),
            });
        }
        let direction = match fields[0] {
            "forward" => Direction::Forward,
            "backward" => Direction::Backward,
            other => {
                return Err(CoreError::Parse {
                    line: idx + 1,
                    message: format!("unknown direction {other:?}"),
                })
            }
        };
        let work = fields[1].parse::<f64>().map_err(|e| CoreError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let seed = fields[2].parse::<u64>().map_err(|e| CoreError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(WorkRecord {
            direction,
            work,
            snapshot_id: fields[3].to_string(),
            protocol_id: String::new(),
            seed,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests_support::harmonic_system;
    use crate::model::{ExternalTerm, Particle, Role, TermSet, ToyParticleSystem};
    use crate::sampling::{draw_snapshots, langevin_propagate, LangevinParams};

    fn shifted_well(center: f64) -> ToyParticleSystem {
        ToyParticleSystem::new(
            1,
            vec![Particle {
                mass: 1.0,
                species: 0,
                role: Role::Host,
            }],
            TermSet {
                pair: vec![],
                external: vec![ExternalTerm {
                    particle: 0,
                    k: 1.0,
                    center: vec![center],
                }],
            },
        )
        .unwrap()
    }

    fn equilibrated_snapshots(
        sys: &ToyParticleSystem,
        n: usize,
        seed: u64,
        state: ThermoState,
    ) -> Vec<Snapshot> {
        let params = LangevinParams {
            dt: 0.05,
            gamma: 1.0,
            n_steps: 2_000 + n * 40,
            n_equil: 2_000,
            seed,
            energy_bound: 1e8,
        };
        let traj = langevin_propagate(sys, &[0.0], &params, state).unwrap();
        draw_snapshots(&traj, 40, n).unwrap()
    }

    #[test]
    fn identical_surfaces_give_zero_work() {
        let sys = harmonic_system(1.0);
        let state = ThermoState::new(1.0).unwrap();
        let start = Snapshot {
            coords: vec![0.4],
            energy: 0.0,
            source_step: 0,
        };
        let params = SwitchParams {
            switch_steps: 25,
            steps_per_increment: 2,
            dt: 0.05,
            gamma: 1.0,
            energy_bound: 1e8,
        };
        let (rec, _) = neq_switch(
            &sys,
            &sys,
            &start,
            &params,
            state,
            Direction::Forward,
            9,
            "same",
        )
        .unwrap();
        assert_eq!(rec.work, 0.0);
    }

    #[test]
    fn work_audit_identity_holds() {
        let a = shifted_well(0.0);
        let b = shifted_well(1.5);
        let state = ThermoState::new(1.0).unwrap();
        let start = Snapshot {
            coords: vec![0.2],
            energy: 0.0,
            source_step: 3,
        };
        let params = SwitchParams {
            switch_steps: 40,
            steps_per_increment: 3,
            dt: 0.04,
            gamma: 2.0,
            energy_bound: 1e8,
        };
        let (rec, audit) = neq_switch(
            &a,
            &b,
            &start,
            &params,
            state,
            Direction::Forward,
            100,
            "shift",
        )
        .unwrap();
        let lhs = rec.work + audit.heat;
        let rhs = audit.u_final - audit.u_initial;
        assert!(
            (lhs - rhs).abs() < 1e-9,
            "work {} + heat {} != dU {}",
            rec.work,
            audit.heat,
            rhs
        );
    }

    #[test]
    fn slow_switching_recovers_zero_delta_f_for_translated_well() {
        // Translating a harmonic well leaves F unchanged; quasi-static
        // switching should give mean work near 0.
        let a = shifted_well(0.0);
        let b = shifted_well(1.0);
        let state = ThermoState::new(1.0).unwrap();
        let snaps = equilibrated_snapshots(&a, 20, 7, state);
        let params = SwitchParams {
            switch_steps: 3_000,
            steps_per_increment: 2,
            dt: 0.05,
            gamma: 2.0,
            energy_bound: 1e8,
        };
        let works: Vec<f64> = snaps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                neq_switch(
                    &a,
                    &b,
                    s,
                    &params,
                    state,
                    Direction::Forward,
                    1000 + i as u64,
                    "slow",
                )
                .unwrap()
                .0
                .work
            })
            .collect();
        let mean_w = crate::stats::mean(&works);
        let se = crate::stats::standard_error(&works);
        assert!(
            mean_w.abs() < 3.0 * se.max(0.02),
            "quasi-static mean work {mean_w} (se {se}) should be ~0"
        );
    }

    #[test]
    fn jarzynski_constant_works() {
        let state = ThermoState::new(2.0).unwrap();
        let est = jarzynski_estimate(&[1.5; 50], state, 0, 0).unwrap();
        assert!((est.value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn finite_rate_jarzynski_hits_zero_with_positive_dissipation() {
        let a = shifted_well(0.0);
        let b = shifted_well(1.0);
        let state = ThermoState::new(1.0).unwrap();
        let snaps = equilibrated_snapshots(&a, 120, 77, state);
        let params = SwitchParams {
            switch_steps: 120,
            steps_per_increment: 1,
            dt: 0.05,
            gamma: 1.0,
            energy_bound: 1e8,
        };
        let works: Vec<f64> = snaps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                neq_switch(
                    &a,
                    &b,
                    s,
                    &params,
                    state,
                    Direction::Forward,
                    2000 + i as u64,
                    "finite",
                )
                .unwrap()
                .0
                .work
            })
            .collect();
        let est = jarzynski_estimate(&works, state, 300, 5).unwrap();
        assert!(
            est.value.abs() < 3.0 * est.stderr,
            "Jarzynski {} +- {} should bracket 0",
            est.value,
            est.stderr
        );
        assert!(
            crate::stats::mean(&works) > 3.0 * crate::stats::standard_error(&works),
            "mean work should be dissipative (> 0)"
        );
    }

    #[test]
    fn bar_antisymmetric_inputs_give_zero() {
        let fwd = vec![0.5, 1.0, -0.25, 2.0];
        let bwd: Vec<f64> = fwd.iter().map(|w| -w).collect();
        let state = ThermoState::new(1.0).unwrap();
        let est = crooks_bar_estimate(&fwd, &bwd, state, 0, 0).unwrap();
        assert!(est.converged);
        assert!(est.value.abs() < 1e-10, "BAR {}", est.value);
    }

    #[test]
    fn bar_recovers_stiffness_change() {
        // Instantaneous switching between k = 1 and k = 4 wells:
        // W_fwd = (k2 - k1) x^2 / 2 on A-samples; the raw reverse work on
        // B-samples is (k1 - k2) y^2 / 2, conjugated onto the forward axis
        // by negation. dF = ln(k2/k1) / (2 beta).
        use rand_distr::{Distribution, Normal};
        let mut rng = chacha(3);
        let (k1, k2) = (1.0f64, 4.0f64);
        let state = ThermoState::new(1.0).unwrap();
        let da = Normal::new(0.0, (1.0 / k1).sqrt()).unwrap();
        let db = Normal::new(0.0, (1.0 / k2).sqrt()).unwrap();
        let fwd: Vec<f64> = (0..4000)
            .map(|_| {
                let x: f64 = da.sample(&mut rng);
                0.5 * (k2 - k1) * x * x
            })
            .collect();
        let bwd: Vec<f64> = (0..4000)
            .map(|_| {
                let x: f64 = db.sample(&mut rng);
                -(0.5 * (k1 - k2) * x * x)
            })
            .collect();
        let est = crooks_bar_estimate(&fwd, &bwd, state, 200, 9).unwrap();
        let expected = 0.5 * 4.0f64.ln();
        assert!(est.converged);
        assert!(
            (est.value - expected).abs() < 3.0 * est.stderr,
            "BAR {} +- {} vs {expected}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn work_csv_round_trip() {
        let records = vec![
            WorkRecord {
                direction: Direction::Forward,
                work: 0.125,
                snapshot_id: "step:40".into(),
                protocol_id: String::new(),
                seed: 7,
            },
            WorkRecord {
                direction: Direction::Backward,
                work: -1.5e-3,
                snapshot_id: "step:80".into(),
                protocol_id: String::new(),
                seed: 8,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("work.csv");
        write_work_records_csv(&path, &records).unwrap();
        let back = read_work_records_csv(&path).unwrap();
        assert_eq!(records, back);
    }
}
