//! System definition files.
//!
//! JSON with top-level keys `dim`, `particles`, `pair_terms`,
//! `interaction_terms`, `coupling`, and `oracle`; see `docs/formats.md` for
//! the full schema. Per-particle wells are written inline on the particle
//! entry and split into host/guest term sets by role on load.

use crate::error::{CoreError, Result};
use crate::model::{
    AlchemicalPotential, Coupling, ExternalTerm, OracleSpec, PairTerm, Particle, Role, TermSet,
    TieredOracle,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleEntry {
    pub mass: f64,
    #[serde(default)]
    pub species: u32,
    pub role: Role,
    /// Optional harmonic confining well `{ "k": .., "center": [..] }`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub well: Option<WellEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WellEntry {
    pub k: f64,
    pub center: Vec<f64>,
}

/// On-disk system definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub dim: usize,
    pub particles: Vec<ParticleEntry>,
    /// Terms internal to host or guest (must not cross roles).
    #[serde(default)]
    pub pair_terms: Vec<PairTerm>,
    /// Host-guest cross terms scaled by lambda.
    #[serde(default)]
    pub interaction_terms: Vec<PairTerm>,
    #[serde(default)]
    pub coupling: Coupling,
    pub oracle: OracleSpec,
}

impl SystemFile {
    pub fn build(&self) -> Result<TieredOracle> {
        let particles: Vec<Particle> = self
            .particles
            .iter()
            .map(|p| Particle {
                mass: p.mass,
                species: p.species,
                role: p.role,
            })
            .collect();

        let mut host = TermSet::default();
        let mut guest = TermSet::default();
        for (idx, p) in self.particles.iter().enumerate() {
            if let Some(w) = &p.well {
                let term = ExternalTerm {
                    particle: idx,
                    k: w.k,
                    center: w.center.clone(),
                };
                match p.role {
                    Role::Host => host.external.push(term),
                    Role::Guest => guest.external.push(term),
                }
            }
        }
        for t in &self.pair_terms {
            let (ri, rj) = (
                self.particles
                    .get(t.i)
                    .ok_or_else(|| {
                        CoreError::InvalidSystem(format!("pair index {} out of range", t.i))
                    })?
                    .role,
                self.particles
                    .get(t.j)
                    .ok_or_else(|| {
                        CoreError::InvalidSystem(format!("pair index {} out of range", t.j))
                    })?
                    .role,
            );
            match (ri, rj) {
                (Role::Host, Role::Host) => host.pair.push(*t),
                (Role::Guest, Role::Guest) => guest.pair.push(*t),
                _ => {
                    return Err(CoreError::InvalidSystem(format!(
                        "pair term ({}, {}) crosses host/guest roles; move it to interaction_terms",
                        t.i, t.j
                    )))
                }
            }
        }
        let interaction = TermSet {
            pair: self.interaction_terms.clone(),
            external: vec![],
        };

        let potential =
            AlchemicalPotential::new(self.dim, particles, host, guest, interaction, self.coupling)?;
        TieredOracle::new(potential, self.oracle.clone())
    }
}

pub fn load_system(path: &Path) -> Result<TieredOracle> {
    let text = std::fs::read_to_string(path)?;
    let file: SystemFile = serde_json::from_str(&text)?;
    file.build()
}

pub fn save_system(path: &Path, file: &SystemFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    std::fs::write(path, text)?;
    Ok(())
}
