//! End-to-end FEP over a lambda schedule: sample every window, assemble the
//! reduced-potential matrix, solve MBAR, check overlaps, and refine the
//! schedule with midpoint windows until every adjacent pair overlaps.

use crate::error::Result;
use crate::fep::{
    evaluate_reduced_potentials, mbar_solve, overlap_diagnostic, refine_schedule, Estimate,
    LambdaSchedule, MbarOptions, MbarResult,
};
use crate::model::{Surface, ThermoState, Tier, TieredOracle};
use crate::rng::derive_seed;
use crate::sampling::{draw_snapshots, langevin_propagate_at, LangevinParams, Snapshot};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPlan {
    pub stride: usize,
    pub max_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Minimum acceptable adjacent-pair overlap before a midpoint window is
    /// inserted.
    pub min_overlap: f64,
    pub max_rounds: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            min_overlap: 0.03,
            max_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FepConfig {
    pub schedule: Vec<f64>,
    pub beta: f64,
    pub tier: Tier,
    pub sampling: LangevinParams,
    pub snapshots: SnapshotPlan,
    #[serde(default)]
    pub mbar: Option<MbarOptions>,
    #[serde(default)]
    pub refine: RefineConfig,
    pub seed: u64,
}

/// Per-window free-energy difference extracted from the joint MBAR solve,
/// so the telescoped sum reproduces the endpoint difference exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub lambda_from: f64,
    pub lambda_to: f64,
    pub delta_f: Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FepOutcome {
    pub lambdas: Vec<f64>,
    pub mbar: MbarResult,
    pub overlaps: Vec<f64>,
    /// Decoupling free energy `G(lambda=0) - G(lambda=1)` in reduced energy
    /// units (dimensionless f divided by beta).
    pub delta_g_decoupling: Estimate,
    pub per_window: Vec<WindowResult>,
    pub n_samples_per_window: Vec<usize>,
    pub refinement_rounds: usize,
}

/// Sample one window and draw its snapshots.
pub fn sample_window(
    oracle: &TieredOracle,
    tier: Tier,
    lambda: f64,
    start: &[f64],
    sampling: &LangevinParams,
    plan: &SnapshotPlan,
    state: ThermoState,
) -> Result<Vec<Snapshot>> {
    let surface = oracle.surface(tier, lambda)?;
    let traj = langevin_propagate_at(&surface, start, sampling, state, lambda)?;
    draw_snapshots(&traj, plan.stride, plan.max_count)
}

/// Default start coordinates: every particle at its confining-well center
/// (origin when unconfined), with the guest nudged off exact overlap.
pub fn default_start_coords(oracle: &TieredOracle) -> Vec<f64> {
    let pot = oracle.potential();
    let dim = pot.dim;
    let mut coords = vec![0.0; pot.n_coords()];
    for set in [&pot.host_terms, &pot.guest_terms] {
        for t in &set.external {
            for d in 0..dim {
                coords[t.particle * dim + d] = t.center[d];
            }
        }
    }
    // Avoid exactly coincident particles at step zero.
    for p in 1..pot.n_particles() {
        let same = (0..dim).all(|d| coords[p * dim + d] == coords[0 * dim + d]);
        if same {
            coords[p * dim] += 0.31 + 0.17 * p as f64;
        }
    }
    coords
}

/// Run FEP on one oracle tier, refining the schedule until overlaps pass.
pub fn fep_run(oracle: &TieredOracle, config: &FepConfig) -> Result<FepOutcome> {
    let state = ThermoState::new(config.beta)?;
    let mut schedule = LambdaSchedule::new(config.schedule.clone())?;
    let mbar_opts = config.mbar.unwrap_or_default();
    let start = default_start_coords(oracle);
    let mut rounds = 0;

    loop {
        let lambdas = schedule.values().to_vec();
        let mut snapshot_sets = Vec::with_capacity(lambdas.len());
        for &lambda in &lambdas {
            let mut params = config.sampling;
            params.seed = derive_seed(config.seed, &format!("fep/window/{lambda:.6}"));
            snapshot_sets.push(sample_window(
                oracle,
                config.tier,
                lambda,
                &start,
                &params,
                &config.snapshots,
                state,
            )?);
        }
        let surfaces: Vec<_> = lambdas
            .iter()
            .map(|&l| oracle.surface(config.tier, l))
            .collect::<Result<Vec<_>>>()?;
        let surface_refs: Vec<&dyn Surface> =
            surfaces.iter().map(|s| s as &dyn Surface).collect();
        let matrix = evaluate_reduced_potentials(&snapshot_sets, &surface_refs, state)?;
        let overlaps = overlap_diagnostic(&matrix)?;

        if rounds < config.refine.max_rounds {
            if let Some(refined) = refine_schedule(&lambdas, &overlaps, config.refine.min_overlap)
            {
                schedule = LambdaSchedule::new(refined)?;
                rounds += 1;
                continue;
            }
        }

        let mut opts = mbar_opts;
        opts.bootstrap_seed = derive_seed(config.seed, "fep/bootstrap");
        let mbar = mbar_solve(&matrix, &opts)?;

        let per_window: Vec<WindowResult> = (0..lambdas.len() - 1)
            .map(|k| WindowResult {
                lambda_from: lambdas[k],
                lambda_to: lambdas[k + 1],
                delta_f: mbar.delta(k, k + 1),
            })
            .collect();

        let coupled = schedule.coupled_index();
        let decoupled = schedule.decoupled_index();
        let df = mbar.delta(coupled, decoupled);
        let delta_g_decoupling =
            Estimate::new(df.value / config.beta, df.stderr / config.beta);

        return Ok(FepOutcome {
            lambdas,
            mbar,
            overlaps,
            delta_g_decoupling,
            per_window,
            n_samples_per_window: snapshot_sets.iter().map(|s| s.len()).collect(),
            refinement_rounds: rounds,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fep::telescope_sum;
    use crate::model::{
        AlchemicalPotential, Coupling, ExternalTerm, OracleSpec, PairKind, PairTerm, Particle,
        Role, TermSet,
    };

    fn toy_oracle() -> TieredOracle {
        let potential = AlchemicalPotential::new(
            1,
            vec![
                Particle {
                    mass: 1.0,
                    species: 0,
                    role: Role::Host,
                },
                Particle {
                    mass: 1.0,
                    species: 1,
                    role: Role::Guest,
                },
            ],
            TermSet {
                pair: vec![],
                external: vec![ExternalTerm {
                    particle: 0,
                    k: 10.0,
                    center: vec![0.0],
                }],
            },
            TermSet {
                pair: vec![],
                external: vec![ExternalTerm {
                    particle: 1,
                    k: 0.8,
                    center: vec![0.0],
                }],
            },
            TermSet {
                pair: vec![PairTerm {
                    i: 0,
                    j: 1,
                    kind: PairKind::Harmonic { k: 3.0, r0: 0.0 },
                }],
                external: vec![],
            },
            Coupling::Linear,
        )
        .unwrap();
        TieredOracle::new(potential, OracleSpec::zero(5)).unwrap()
    }

    fn config() -> FepConfig {
        FepConfig {
            schedule: vec![1.0, 0.5, 0.0],
            beta: 1.0,
            tier: Tier::Base,
            sampling: LangevinParams {
                dt: 0.05,
                gamma: 1.0,
                n_steps: 9_000,
                n_equil: 1_000,
                seed: 0,
                energy_bound: 1e8,
            },
            snapshots: SnapshotPlan {
                stride: 4,
                max_count: 2_000,
            },
            mbar: Some(MbarOptions {
                n_bootstrap: 50,
                ..Default::default()
            }),
            refine: RefineConfig::default(),
            seed: 99,
        }
    }

    #[test]
    fn harmonic_coupling_matches_analytic_free_energy() {
        // Both endpoints are exactly Gaussian; the analytic module gives the
        // ground truth for the decoupling free energy.
        use crate::model::{analytic_free_energy, ThermoState, ToyParticleSystem};
        let oracle = toy_oracle();
        let outcome = fep_run(&oracle, &config()).unwrap();

        let state = ThermoState::new(1.0).unwrap();
        let coupled: ToyParticleSystem = oracle.potential().to_toy_system().unwrap();
        let f1 = analytic_free_energy(&coupled, state).unwrap();
        let mut decoupled = coupled.clone();
        decoupled.terms.pair.clear();
        let f0 = analytic_free_energy(&decoupled, state).unwrap();
        let expected = f0 - f1;

        let got = outcome.delta_g_decoupling;
        assert!(
            (got.value - expected).abs() < 3.0 * got.stderr.max(0.01),
            "dG {} +- {} vs analytic {expected}",
            got.value,
            got.stderr
        );
    }

    #[test]
    fn per_window_deltas_telescope_to_endpoint_difference() {
        let oracle = toy_oracle();
        let outcome = fep_run(&oracle, &config()).unwrap();
        let total = telescope_sum(
            &outcome
                .per_window
                .iter()
                .map(|w| w.delta_f)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let joint = outcome.mbar.f_k.last().unwrap() - outcome.mbar.f_k[0];
        assert!(
            (total.value - joint).abs() < 1e-10,
            "telescoped {} vs joint {joint}",
            total.value
        );
    }

    #[test]
    fn overlaps_pass_threshold_after_refinement() {
        let oracle = toy_oracle();
        let outcome = fep_run(&oracle, &config()).unwrap();
        assert!(outcome
            .overlaps
            .iter()
            .all(|&o| o >= RefineConfig::default().min_overlap));
    }
}
