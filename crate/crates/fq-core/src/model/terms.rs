//! Potential term kinds and their analytic energies and gradients.

use crate::error::{CoreError, Result};
use crate::model::TermSet;
use serde::{Deserialize, Serialize};

/// Guard against exactly coincident particles where 1/r blows up.
const R2_SINGULAR: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// `V = k/2 (r - r0)^2`
    Harmonic { k: f64, r0: f64 },
    /// `V = 4 eps ((sigma/r)^12 - (sigma/r)^6)`
    LennardJones { epsilon: f64, sigma: f64 },
    /// Beutler-style soft-core Lennard-Jones; under soft-core coupling the
    /// effective distance is `r_eff^6 = alpha (1 - lambda) sigma^6 + r^6`
    /// and the energy carries a `lambda` prefactor. Evaluated at fixed
    /// full coupling it reduces to plain Lennard-Jones.
    SoftCoreLj { epsilon: f64, sigma: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub kind: PairKind,
}

impl PairTerm {
    pub fn validate(&self, n_particles: usize) -> Result<()> {
        if self.i >= n_particles || self.j >= n_particles {
            return Err(CoreError::InvalidSystem(format!(
                "pair term ({}, {}) out of range for {n_particles} particles",
                self.i, self.j
            )));
        }
        if self.i == self.j {
            return Err(CoreError::InvalidSystem(format!(
                "pair term references particle {} twice",
                self.i
            )));
        }
        match self.kind {
            PairKind::Harmonic { k, .. } => {
                if !(k > 0.0) {
                    return Err(CoreError::InvalidSystem(format!(
                        "spring constant must be positive, got {k}"
                    )));
                }
            }
            PairKind::LennardJones { epsilon, sigma }
            | PairKind::SoftCoreLj { epsilon, sigma, .. } => {
                if !(epsilon > 0.0) || !(sigma > 0.0) {
                    return Err(CoreError::InvalidSystem(format!(
                        "LJ parameters must be positive, got epsilon={epsilon}, sigma={sigma}"
                    )));
                }
                if let PairKind::SoftCoreLj { alpha, .. } = self.kind {
                    if !(alpha >= 0.0) {
                        return Err(CoreError::InvalidSystem(format!(
                            "soft-core alpha must be non-negative, got {alpha}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-particle harmonic confining well `V = k/2 |x - center|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalTerm {
    pub particle: usize,
    pub k: f64,
    pub center: Vec<f64>,
}

impl ExternalTerm {
    pub fn validate(&self, n_particles: usize, dim: usize) -> Result<()> {
        if self.particle >= n_particles {
            return Err(CoreError::InvalidSystem(format!(
                "external term particle {} out of range",
                self.particle
            )));
        }
        if self.center.len() != dim {
            return Err(CoreError::InvalidSystem(format!(
                "external term center has {} components, expected {dim}",
                self.center.len()
            )));
        }
        if !(self.k > 0.0) {
            return Err(CoreError::InvalidSystem(format!(
                "well constant must be positive, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

pub(crate) fn pair_distance(dim: usize, coords: &[f64], i: usize, j: usize) -> (f64, Vec<f64>) {
    let mut dx = vec![0.0; dim];
    let mut r2 = 0.0;
    for d in 0..dim {
        dx[d] = coords[i * dim + d] - coords[j * dim + d];
        r2 += dx[d] * dx[d];
    }
    (r2, dx)
}

/// Energy and radial derivative `dV/dr` of a pair kind at full coupling.
fn pair_energy_dvdr(kind: &PairKind, r: f64, i: usize, j: usize) -> Result<(f64, f64)> {
    match *kind {
        PairKind::Harmonic { k, r0 } => {
            if r0 != 0.0 && r * r < R2_SINGULAR {
                // Gradient direction undefined when the spring has a rest
                // length and the particles coincide.
                return Err(CoreError::SingularConfiguration { i, j });
            }
            Ok((0.5 * k * (r - r0).powi(2), k * (r - r0)))
        }
        PairKind::LennardJones { epsilon, sigma }
        | PairKind::SoftCoreLj { epsilon, sigma, .. } => {
            if r * r < R2_SINGULAR {
                return Err(CoreError::SingularConfiguration { i, j });
            }
            let sr6 = (sigma / r).powi(6);
            let e = 4.0 * epsilon * (sr6 * sr6 - sr6);
            let dvdr = 4.0 * epsilon * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r;
            Ok((e, dvdr))
        }
    }
}

fn accumulate_pair(
    term: &PairTerm,
    dim: usize,
    coords: &[f64],
    forces: Option<&mut [f64]>,
) -> Result<f64> {
    let (r2, dx) = pair_distance(dim, coords, term.i, term.j);
    let r = r2.sqrt();
    // Harmonic springs with zero rest length are regular at r = 0; handle
    // them without dividing by r.
    if let PairKind::Harmonic { k, r0: 0.0 } = term.kind {
        if let Some(forces) = forces {
            for d in 0..dim {
                forces[term.i * dim + d] -= k * dx[d];
                forces[term.j * dim + d] += k * dx[d];
            }
        }
        return Ok(0.5 * k * r2);
    }
    let (e, dvdr) = pair_energy_dvdr(&term.kind, r, term.i, term.j)?;
    if let Some(forces) = forces {
        let factor = dvdr / r;
        for d in 0..dim {
            forces[term.i * dim + d] -= factor * dx[d];
            forces[term.j * dim + d] += factor * dx[d];
        }
    }
    Ok(e)
}

fn accumulate_external(
    term: &ExternalTerm,
    dim: usize,
    coords: &[f64],
    forces: Option<&mut [f64]>,
) -> f64 {
    let mut e = 0.0;
    for d in 0..dim {
        let dx = coords[term.particle * dim + d] - term.center[d];
        e += 0.5 * term.k * dx * dx;
        if let Some(&mut ref mut forces) = forces {
            forces[term.particle * dim + d] -= term.k * dx;
        }
    }
    e
}

pub(crate) fn term_set_energy(terms: &TermSet, dim: usize, coords: &[f64]) -> Result<f64> {
    let mut e = 0.0;
    for t in &terms.pair {
        e += accumulate_pair(t, dim, coords, None)?;
    }
    for t in &terms.external {
        e += accumulate_external(t, dim, coords, None);
    }
    Ok(e)
}

pub(crate) fn term_set_energy_forces(
    terms: &TermSet,
    dim: usize,
    coords: &[f64],
    forces: &mut [f64],
) -> Result<f64> {
    let mut e = 0.0;
    for t in &terms.pair {
        e += accumulate_pair(t, dim, coords, Some(forces))?;
    }
    for t in &terms.external {
        e += accumulate_external(t, dim, coords, Some(forces));
    }
    Ok(e)
}

/// Soft-core evaluation of an interaction term set at coupling `lambda`.
///
/// Lennard-Jones kinds use
/// `V = 4 eps lambda (D^-2 - D^-1)` with `D = alpha (1 - lambda) + (r/sigma)^6`;
/// all other kinds scale linearly with `lambda`.
pub(crate) fn soft_core_interaction(
    terms: &TermSet,
    dim: usize,
    coords: &[f64],
    lambda: f64,
    forces: Option<&mut Vec<f64>>,
) -> Result<f64> {
    let mut e = 0.0;
    for t in &terms.pair {
        // Plain LJ placed in the interaction set under soft-core coupling
        // gets the default alpha = 0.5.
        let (epsilon, sigma, alpha) = match t.kind {
            PairKind::SoftCoreLj {
                epsilon,
                sigma,
                alpha,
            } => (epsilon, sigma, alpha),
            PairKind::LennardJones { epsilon, sigma } => (epsilon, sigma, 0.5),
            PairKind::Harmonic { .. } => {
                // Harmonic interaction terms still couple linearly.
                let scaled = lambda * accumulate_pair(t, dim, coords, None)?;
                if let Some(&mut ref mut f) = forces {
                    let mut fi = vec![0.0; coords.len()];
                    accumulate_pair(t, dim, coords, Some(&mut fi))?;
                    for (a, b) in f.iter_mut().zip(fi.iter()) {
                        *a += lambda * b;
                    }
                }
                e += scaled;
                continue;
            }
        };
        let (r2, dx) = pair_distance(dim, coords, t.i, t.j);
        let r = r2.sqrt();
        let denom = alpha * (1.0 - lambda) + (r / sigma).powi(6);
        if denom < 1e-12 {
            return Err(CoreError::SingularConfiguration { i: t.i, j: t.j });
        }
        e += 4.0 * epsilon * lambda * (denom.powi(-2) - denom.powi(-1));
        if let Some(&mut ref mut f) = forces {
            // dV/dr = 4 eps lambda (-2 D^-3 + D^-2) * 6 r^5 / sigma^6
            let dvdd = 4.0 * epsilon * lambda * (-2.0 * denom.powi(-3) + denom.powi(-2));
            let dddr = 6.0 * r.powi(5) / sigma.powi(6);
            let factor = if r2 < R2_SINGULAR {
                0.0 // dD/dr vanishes as r^5; the gradient is zero at overlap
            } else {
                dvdd * dddr / r
            };
            for d in 0..dim {
                f[t.i * dim + d] -= factor * dx[d];
                f[t.j * dim + d] += factor * dx[d];
            }
        }
    }
    for t in &terms.external {
        let scaled = lambda * accumulate_external(t, dim, coords, None);
        if let Some(&mut ref mut f) = forces {
            let mut fi = vec![0.0; coords.len()];
            accumulate_external(t, dim, coords, Some(&mut fi));
            for (a, b) in f.iter_mut().zip(fi.iter()) {
                *a += lambda * b;
            }
        }
        e += scaled;
    }
    Ok(e)
}
