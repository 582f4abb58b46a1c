//! Toy particle systems and alchemical potentials.
//!
//! Systems are small collections of point particles in 1-3 dimensions with
//! harmonic, Lennard-Jones, and soft-core pair terms plus per-particle
//! harmonic confining wells. An [`AlchemicalPotential`] splits the terms into
//! host-internal, guest-internal, and host-guest interaction sets; the
//! interaction is scaled by a coupling parameter so that at `lambda = 0` the
//! energy decomposes exactly into independent host and guest energies.

mod analytic;
mod io;
mod oracle;
pub(crate) mod terms;

pub use analytic::analytic_free_energy;
pub use io::{load_system, save_system, SystemFile};
pub use oracle::{
    oracle_energy, GaussianBump, OracleSpec, PerturbationSpec, Tier, TierSurface, TieredOracle,
};
pub use terms::{ExternalTerm, PairKind, PairTerm};

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Inverse temperature in reduced units (`k_B = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoState {
    beta: f64,
}

impl ThermoState {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(CoreError::InvalidArgument(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Role of a particle in the alchemical split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Host,
    Guest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub mass: f64,
    /// Permutation group label: particles with the same species are
    /// interchangeable for descriptor purposes.
    #[serde(default)]
    pub species: u32,
    #[serde(default = "default_role")]
    pub role: Role,
}

fn default_role() -> Role {
    Role::Host
}

/// A bag of potential terms over a shared particle set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermSet {
    #[serde(default)]
    pub pair: Vec<PairTerm>,
    #[serde(default)]
    pub external: Vec<ExternalTerm>,
}

impl TermSet {
    pub fn is_empty(&self) -> bool {
        self.pair.is_empty() && self.external.is_empty()
    }
}

/// Plain (non-alchemical) toy system: particles plus one term set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParticleSystem {
    pub dim: usize,
    pub particles: Vec<Particle>,
    pub terms: TermSet,
}

impl ToyParticleSystem {
    pub fn new(dim: usize, particles: Vec<Particle>, terms: TermSet) -> Result<Self> {
        let system = Self {
            dim,
            particles,
            terms,
        };
        system.validate()?;
        Ok(system)
    }

    fn validate(&self) -> Result<()> {
        validate_particles(self.dim, &self.particles)?;
        validate_terms(&self.terms, self.particles.len(), self.dim)?;
        Ok(())
    }

    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn n_coords(&self) -> usize {
        self.particles.len() * self.dim
    }

    /// Per-coordinate masses (each particle mass repeated `dim` times).
    pub fn coord_masses(&self) -> Vec<f64> {
        self.particles
            .iter()
            .flat_map(|p| std::iter::repeat(p.mass).take(self.dim))
            .collect()
    }

    pub fn energy(&self, coords: &[f64]) -> Result<f64> {
        check_coords(self, coords)?;
        terms::term_set_energy(&self.terms, self.dim, coords)
    }

    pub fn energy_forces(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_coords(self, coords)?;
        let mut forces = vec![0.0; coords.len()];
        let e = terms::term_set_energy_forces(&self.terms, self.dim, coords, &mut forces)?;
        Ok((e, forces))
    }
}

fn check_coords(system: &dyn SystemGeometry, coords: &[f64]) -> Result<()> {
    if coords.len() != system.n_coords() {
        return Err(CoreError::InvalidArgument(format!(
            "expected {} coordinates, got {}",
            system.n_coords(),
            coords.len()
        )));
    }
    Ok(())
}

trait SystemGeometry {
    fn n_coords(&self) -> usize;
}

impl SystemGeometry for ToyParticleSystem {
    fn n_coords(&self) -> usize {
        self.n_coords()
    }
}

impl SystemGeometry for AlchemicalPotential {
    fn n_coords(&self) -> usize {
        self.n_coords()
    }
}

fn validate_particles(dim: usize, particles: &[Particle]) -> Result<()> {
    if particles.is_empty() {
        return Err(CoreError::InvalidSystem(
            "zero-particle systems are rejected".into(),
        ));
    }
    if !(1..=3).contains(&dim) {
        return Err(CoreError::InvalidSystem(format!(
            "dim must be 1, 2, or 3, got {dim}"
        )));
    }
    for (idx, p) in particles.iter().enumerate() {
        if !(p.mass > 0.0) || !p.mass.is_finite() {
            return Err(CoreError::InvalidSystem(format!(
                "particle {idx} has non-positive mass {}",
                p.mass
            )));
        }
    }
    Ok(())
}

fn validate_terms(terms: &TermSet, n_particles: usize, dim: usize) -> Result<()> {
    for t in &terms.pair {
        t.validate(n_particles)?;
    }
    for t in &terms.external {
        t.validate(n_particles, dim)?;
    }
    Ok(())
}

/// How the interaction term set is coupled to `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Interaction energy multiplied by `lambda`.
    #[default]
    Linear,
    /// Lennard-Jones interaction terms use the soft-core form
    /// (finite at particle overlap for `lambda < 1`); other interaction
    /// terms still scale linearly.
    SoftCore,
}

/// A lambda-parameterized potential surface over toy particle coordinates.
///
/// `energy(coords, 0.0)` splits exactly into host terms plus guest terms;
/// `energy(coords, 1.0)` is the fully coupled system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlchemicalPotential {
    pub dim: usize,
    pub particles: Vec<Particle>,
    pub host_terms: TermSet,
    pub guest_terms: TermSet,
    pub interaction_terms: TermSet,
    #[serde(default)]
    pub coupling: Coupling,
    /// Default coupling value carried by the potential; operations that take
    /// an explicit `lambda` ignore it.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl AlchemicalPotential {
    pub fn new(
        dim: usize,
        particles: Vec<Particle>,
        host_terms: TermSet,
        guest_terms: TermSet,
        interaction_terms: TermSet,
        coupling: Coupling,
    ) -> Result<Self> {
        let pot = Self {
            dim,
            particles,
            host_terms,
            guest_terms,
            interaction_terms,
            coupling,
            lambda: 1.0,
        };
        pot.validate()?;
        Ok(pot)
    }

    pub fn validate(&self) -> Result<()> {
        validate_particles(self.dim, &self.particles)?;
        for (set, name) in [
            (&self.host_terms, "host"),
            (&self.guest_terms, "guest"),
            (&self.interaction_terms, "interaction"),
        ] {
            validate_terms(set, self.particles.len(), self.dim)?;
            for t in &set.pair {
                let cross = self.particles[t.i].role != self.particles[t.j].role;
                if name == "interaction" && !cross {
                    return Err(CoreError::InvalidSystem(format!(
                        "interaction pair ({}, {}) does not cross host/guest roles",
                        t.i, t.j
                    )));
                }
                if name != "interaction" && cross {
                    return Err(CoreError::InvalidSystem(format!(
                        "{name} pair ({}, {}) crosses host/guest roles; put it in interaction_terms",
                        t.i, t.j
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(CoreError::InvalidSystem(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn n_coords(&self) -> usize {
        self.particles.len() * self.dim
    }

    pub fn coord_masses(&self) -> Vec<f64> {
        self.particles
            .iter()
            .flat_map(|p| std::iter::repeat(p.mass).take(self.dim))
            .collect()
    }

    /// Indices of host-guest particle pairs appearing in interaction terms.
    pub fn interaction_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .interaction_terms
            .pair
            .iter()
            .map(|t| (t.i.min(t.j), t.i.max(t.j)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(CoreError::InvalidArgument(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        Ok(())
    }

    pub fn energy(&self, coords: &[f64], lambda: f64) -> Result<f64> {
        check_coords(self, coords)?;
        Self::check_lambda(lambda)?;
        let host = terms::term_set_energy(&self.host_terms, self.dim, coords)?;
        let guest = terms::term_set_energy(&self.guest_terms, self.dim, coords)?;
        let inter = self.interaction_energy(coords, lambda, None)?;
        Ok(host + guest + inter)
    }

    /// Energy and exact analytic forces (`forces = -grad E`).
    pub fn energy_and_forces(&self, coords: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
        check_coords(self, coords)?;
        Self::check_lambda(lambda)?;
        let mut forces = vec![0.0; coords.len()];
        let host = terms::term_set_energy_forces(&self.host_terms, self.dim, coords, &mut forces)?;
        let guest =
            terms::term_set_energy_forces(&self.guest_terms, self.dim, coords, &mut forces)?;
        let inter = self.interaction_energy(coords, lambda, Some(&mut forces))?;
        Ok((host + guest + inter, forces))
    }

    fn interaction_energy(
        &self,
        coords: &[f64],
        lambda: f64,
        forces: Option<&mut Vec<f64>>,
    ) -> Result<f64> {
        match self.coupling {
            Coupling::Linear => {
                // E_int(lambda) = lambda * E_int(1); forces scale the same way.
                match forces {
                    None => Ok(lambda
                        * terms::term_set_energy(&self.interaction_terms, self.dim, coords)?),
                    Some(forces) => {
                        let mut fi = vec![0.0; coords.len()];
                        let e = terms::term_set_energy_forces(
                            &self.interaction_terms,
                            self.dim,
                            coords,
                            &mut fi,
                        )?;
                        for (f, g) in forces.iter_mut().zip(fi.iter()) {
                            *f += lambda * g;
                        }
                        Ok(lambda * e)
                    }
                }
            }
            Coupling::SoftCore => {
                terms::soft_core_interaction(&self.interaction_terms, self.dim, coords, lambda, forces)
            }
        }
    }

    /// View of the potential at fixed `lambda` implementing [`Surface`].
    pub fn at_lambda(&self, lambda: f64) -> Result<AlchemicalSurface<'_>> {
        Self::check_lambda(lambda)?;
        Ok(AlchemicalSurface {
            potential: self,
            lambda,
        })
    }

    /// Collapse into a plain system containing all terms at full coupling.
    /// Only meaningful for analytic-free-energy fixtures.
    pub fn to_toy_system(&self) -> Result<ToyParticleSystem> {
        let mut terms = self.host_terms.clone();
        terms
            .pair
            .extend(self.guest_terms.pair.iter().cloned());
        terms
            .external
            .extend(self.guest_terms.external.iter().cloned());
        terms
            .pair
            .extend(self.interaction_terms.pair.iter().cloned());
        terms
            .external
            .extend(self.interaction_terms.external.iter().cloned());
        ToyParticleSystem::new(self.dim, self.particles.clone(), terms)
    }
}

/// Operation form of [`AlchemicalPotential::energy_and_forces`].
pub fn energy_and_forces(
    potential: &AlchemicalPotential,
    coords: &[f64],
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    potential.energy_and_forces(coords, lambda)
}

/// A potential energy surface over flattened particle coordinates.
///
/// Implementations are pure: same coordinates, same result. All surfaces are
/// safe to evaluate from concurrent workers.
pub trait Surface: Sync {
    fn n_coords(&self) -> usize;
    fn coord_masses(&self) -> Vec<f64>;
    fn energy(&self, coords: &[f64]) -> Result<f64>;
    fn energy_forces(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// An [`AlchemicalPotential`] pinned at a fixed coupling value.
#[derive(Debug, Clone, Copy)]
pub struct AlchemicalSurface<'a> {
    potential: &'a AlchemicalPotential,
    lambda: f64,
}

impl AlchemicalSurface<'_> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Surface for AlchemicalSurface<'_> {
    fn n_coords(&self) -> usize {
        self.potential.n_coords()
    }

    fn coord_masses(&self) -> Vec<f64> {
        self.potential.coord_masses()
    }

    fn energy(&self, coords: &[f64]) -> Result<f64> {
        self.potential.energy(coords, self.lambda)
    }

    fn energy_forces(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.potential.energy_and_forces(coords, self.lambda)
    }
}

impl Surface for ToyParticleSystem {
    fn n_coords(&self) -> usize {
        self.n_coords()
    }

    fn coord_masses(&self) -> Vec<f64> {
        self.coord_masses()
    }

    fn energy(&self, coords: &[f64]) -> Result<f64> {
        self.energy(coords)
    }

    fn energy_forces(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.energy_forces(coords)
    }
}

/// Linear blend of two surfaces: `(1 - s) * from + s * to`.
///
/// Drives nonequilibrium switching protocols.
pub struct MixedSurface<'a> {
    pub from: &'a dyn Surface,
    pub to: &'a dyn Surface,
    pub s: f64,
}

impl<'a> MixedSurface<'a> {
    pub fn new(from: &'a dyn Surface, to: &'a dyn Surface, s: f64) -> Self {
        Self { from, to, s }
    }
}

impl Surface for MixedSurface<'_> {
    fn n_coords(&self) -> usize {
        self.from.n_coords()
    }

    fn coord_masses(&self) -> Vec<f64> {
        self.from.coord_masses()
    }

    fn energy(&self, coords: &[f64]) -> Result<f64> {
        Ok((1.0 - self.s) * self.from.energy(coords)? + self.s * self.to.energy(coords)?)
    }

    fn energy_forces(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (ef, mut ff) = self.from.energy_forces(coords)?;
        let (et, ft) = self.to.energy_forces(coords)?;
        for (f, t) in ff.iter_mut().zip(ft.iter()) {
            *f = (1.0 - self.s) * *f + self.s * t;
        }
        Ok(((1.0 - self.s) * ef + self.s * et, ff))
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// Single 1D particle in a harmonic well at the origin.
    pub(crate) fn harmonic_system(k: f64) -> ToyParticleSystem {
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
                    k,
                    center: vec![0.0],
                }],
            },
        )
        .unwrap()
    }
}
