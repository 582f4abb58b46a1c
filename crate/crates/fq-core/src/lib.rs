//! Desk-scale free-energy machinery: toy particle systems with alchemical
//! coupling, a synthetic three-tier oracle hierarchy, Langevin (BAOAB)
//! sampling, multistate reweighting and nonequilibrium-work estimators, and
//! descriptor-based ensemble surrogate potentials with active and transfer
//! learning.
//!
//! Everything works in reduced units (`k_B = 1`); report layers convert to
//! physical units with a configured scale factor.

pub mod error;
pub mod fep;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod surrogate;

pub use error::{CoreError, Result};
