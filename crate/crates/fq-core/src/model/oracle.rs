//! Synthetic three-tier oracle hierarchy.
//!
//! BASE is the plain alchemical potential. MID adds a smooth, seeded
//! perturbation `p1` and HIGH adds a second one `p2` on top, so tier
//! differences telescope exactly: `HIGH - BASE = (HIGH - MID) + (MID - BASE)`.
//! BASE and MID provide analytic forces; HIGH is energy-only.
//!
//! Perturbations are sums of Gaussian bumps in pair-distance space over the
//! host-guest interaction pairs, realized deterministically from a seed.

use crate::error::{CoreError, Result};
use crate::model::terms::pair_distance;
use crate::model::{AlchemicalPotential, Surface};
use crate::rng::chacha;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Base,
    Mid,
    High,
}

impl Tier {
    pub fn label(&self) -> &'static str {
        match self {
            Tier::Base => "base",
            Tier::Mid => "mid",
            Tier::High => "high",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One Gaussian bump `A exp(-(r - c)^2 / (2 w^2))` in pair-distance space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

/// Seeded recipe for one tier's correction on top of the tier below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Overall amplitude scale; zero disables the tier difference.
    pub amplitude: f64,
    #[serde(default = "default_n_bumps")]
    pub n_bumps: usize,
    #[serde(default = "default_center_range")]
    pub center_range: (f64, f64),
    #[serde(default = "default_width_range")]
    pub width_range: (f64, f64),
    /// Explicit bumps override the seeded draw when present.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bumps: Vec<GaussianBump>,
}

fn default_n_bumps() -> usize {
    3
}
fn default_center_range() -> (f64, f64) {
    (0.8, 1.6)
}
fn default_width_range() -> (f64, f64) {
    (0.15, 0.4)
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        Self {
            amplitude: 0.0,
            n_bumps: 0,
            center_range: default_center_range(),
            width_range: default_width_range(),
            bumps: vec![],
        }
    }

    fn realize(&self, seed: u64) -> Vec<GaussianBump> {
        if !self.bumps.is_empty() {
            return self
                .bumps
                .iter()
                .map(|b| GaussianBump {
                    amplitude: b.amplitude * self.amplitude,
                    ..*b
                })
                .collect();
        }
        if self.amplitude == 0.0 || self.n_bumps == 0 {
            return vec![];
        }
        let mut rng = chacha(seed);
        (0..self.n_bumps)
            .map(|_| {
                let center = rng.random_range(self.center_range.0..=self.center_range.1);
                let width = rng.random_range(self.width_range.0..=self.width_range.1);
                // Signs alternate pseudo-randomly so corrections are not
                // purely repulsive.
                let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
                GaussianBump {
                    amplitude: sign * self.amplitude * (0.5 + rng.random::<f64>()),
                    center,
                    width,
                }
            })
            .collect()
    }
}

/// Oracle configuration as shipped in system definition files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub seed: u64,
    pub mid: PerturbationSpec,
    pub high: PerturbationSpec,
}

impl OracleSpec {
    pub fn zero(seed: u64) -> Self {
        Self {
            seed,
            mid: PerturbationSpec::zero(),
            high: PerturbationSpec::zero(),
        }
    }
}

/// Realized smooth correction: bumps applied over a set of particle pairs.
#[derive(Debug, Clone, PartialEq)]
struct TierPerturbation {
    bumps: Vec<GaussianBump>,
    pairs: Vec<(usize, usize)>,
}

impl TierPerturbation {
    fn energy(&self, dim: usize, coords: &[f64]) -> f64 {
        let mut e = 0.0;
        for &(i, j) in &self.pairs {
            let (r2, _) = pair_distance(dim, coords, i, j);
            let r = r2.sqrt();
            for b in &self.bumps {
                let z = (r - b.center) / b.width;
                e += b.amplitude * (-0.5 * z * z).exp();
            }
        }
        e
    }

    fn add_forces(&self, dim: usize, coords: &[f64], forces: &mut [f64]) {
        for &(i, j) in &self.pairs {
            let (r2, dx) = pair_distance(dim, coords, i, j);
            let r = r2.sqrt();
            if r < 1e-12 {
                continue; // dE/dr finite, direction undefined; bump gradient ~ 0 by symmetry
            }
            let mut dedr = 0.0;
            for b in &self.bumps {
                let z = (r - b.center) / b.width;
                dedr += b.amplitude * (-0.5 * z * z).exp() * (-z / b.width);
            }
            for d in 0..dim {
                forces[i * dim + d] -= dedr * dx[d] / r;
                forces[j * dim + d] += dedr * dx[d] / r;
            }
        }
    }
}

/// The three-tier oracle over one alchemical potential.
#[derive(Debug, Clone)]
pub struct TieredOracle {
    potential: AlchemicalPotential,
    spec: OracleSpec,
    p1: TierPerturbation,
    p2: TierPerturbation,
}

impl TieredOracle {
    pub fn new(potential: AlchemicalPotential, spec: OracleSpec) -> Result<Self> {
        let pairs = potential.interaction_pairs();
        if pairs.is_empty() && (spec.mid.amplitude != 0.0 || spec.high.amplitude != 0.0) {
            return Err(CoreError::InvalidSystem(
                "oracle perturbations configured but the system has no interaction pairs".into(),
            ));
        }
        let p1 = TierPerturbation {
            bumps: spec.mid.realize(spec.seed.wrapping_add(1)),
            pairs: pairs.clone(),
        };
        let p2 = TierPerturbation {
            bumps: spec.high.realize(spec.seed.wrapping_add(2)),
            pairs,
        };
        Ok(Self {
            potential,
            spec,
            p1,
            p2,
        })
    }

    pub fn potential(&self) -> &AlchemicalPotential {
        &self.potential
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    /// Tier energy at the given coordinates and coupling.
    pub fn energy(&self, tier: Tier, coords: &[f64], lambda: f64) -> Result<f64> {
        let base = self.potential.energy(coords, lambda)?;
        Ok(match tier {
            Tier::Base => base,
            Tier::Mid => base + self.p1.energy(self.potential.dim, coords),
            Tier::High => {
                base + self.p1.energy(self.potential.dim, coords)
                    + self.p2.energy(self.potential.dim, coords)
            }
        })
    }

    /// Tier energy and forces. HIGH refuses: energies only at that tier.
    pub fn energy_forces(&self, tier: Tier, coords: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
        if tier == Tier::High {
            return Err(CoreError::ForcesUnavailable {
                tier: tier.label().to_string(),
            });
        }
        let (base, mut forces) = self.potential.energy_and_forces(coords, lambda)?;
        let e = match tier {
            Tier::Base => base,
            Tier::Mid => {
                self.p1
                    .add_forces(self.potential.dim, coords, &mut forces);
                base + self.p1.energy(self.potential.dim, coords)
            }
            Tier::High => unreachable!(),
        };
        Ok((e, forces))
    }

    /// Correction of a tier relative to BASE (the quantity surrogates learn).
    pub fn correction(&self, tier: Tier, coords: &[f64]) -> f64 {
        match tier {
            Tier::Base => 0.0,
            Tier::Mid => self.p1.energy(self.potential.dim, coords),
            Tier::High => {
                self.p1.energy(self.potential.dim, coords)
                    + self.p2.energy(self.potential.dim, coords)
            }
        }
    }

    /// Forces of the tier correction relative to BASE (BASE/MID only).
    pub fn correction_forces(&self, tier: Tier, coords: &[f64]) -> Result<Vec<f64>> {
        let mut forces = vec![0.0; coords.len()];
        match tier {
            Tier::Base => {}
            Tier::Mid => self
                .p1
                .add_forces(self.potential.dim, coords, &mut forces),
            Tier::High => {
                return Err(CoreError::ForcesUnavailable {
                    tier: Tier::High.label().to_string(),
                })
            }
        }
        Ok(forces)
    }

    /// Surface view at a tier and coupling (HIGH surfaces are energy-only).
    pub fn surface(&self, tier: Tier, lambda: f64) -> Result<TierSurface<'_>> {
        AlchemicalPotential::check_lambda_pub(lambda)?;
        Ok(TierSurface {
            oracle: self,
            tier,
            lambda,
        })
    }
}

impl AlchemicalPotential {
    pub(crate) fn check_lambda_pub(lambda: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(CoreError::InvalidArgument(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        Ok(())
    }
}

/// Operation form of [`TieredOracle::energy`].
pub fn oracle_energy(
    oracle: &TieredOracle,
    tier: Tier,
    coords: &[f64],
    lambda: f64,
) -> Result<f64> {
    oracle.energy(tier, coords, lambda)
}

#[derive(Debug, Clone, Copy)]
pub struct TierSurface<'a> {
    oracle: &'a TieredOracle,
    tier: Tier,
    lambda: f64,
}

impl Surface for TierSurface<'_> {
    fn n_coords(&self) -> usize {
        self.oracle.potential.n_coords()
    }

    fn coord_masses(&self) -> Vec<f64> {
        self.oracle.potential.coord_masses()
    }

    fn energy(&self, coords: &[f64]) -> Result<f64> {
        self.oracle.energy(self.tier, coords, self.lambda)
    }

    fn energy_forces(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.oracle.energy_forces(self.tier, coords, self.lambda)
    }
}
