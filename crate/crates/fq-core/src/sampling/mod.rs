//! Equilibrium trajectory generation on any potential surface.

mod csv;
mod langevin;

pub use csv::{read_trajectory_csv, write_trajectory_csv};
pub use langevin::{langevin_propagate, langevin_propagate_at};

use crate::error::{CoreError, Result};
use crate::model::ThermoState;
use serde::{Deserialize, Serialize};

/// Langevin (BAOAB) integration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    pub dt: f64,
    pub gamma: f64,
    pub n_steps: usize,
    /// Burn-in steps discarded before any frame is recorded.
    pub n_equil: usize,
    pub seed: u64,
    /// Abort with an "unstable integration" error when |E| exceeds this.
    #[serde(default = "default_energy_bound")]
    pub energy_bound: f64,
}

fn default_energy_bound() -> f64 {
    1e8
}

impl LangevinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.n_equil >= self.n_steps {
            return Err(CoreError::InvalidArgument(format!(
                "n_equil ({}) must be smaller than n_steps ({})",
                self.n_equil, self.n_steps
            )));
        }
        Ok(())
    }
}

/// One recorded post-burn-in frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Step index counted from the start of the run (burn-in included).
    pub step: usize,
    pub coords: Vec<f64>,
    pub energy: f64,
}

/// An ordered set of frames sampled at one thermodynamic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub state: ThermoState,
    /// Coupling at which the surface was sampled (0 when not alchemical).
    pub lambda: f64,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A single configuration drawn from a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub coords: Vec<f64>,
    pub energy: f64,
    /// Step index of the source frame.
    pub source_step: usize,
}

/// Every `stride`-th post-burn-in frame, capped at `max_count`.
///
/// A stride larger than the trajectory still yields the first frame.
pub fn draw_snapshots(
    trajectory: &Trajectory,
    stride: usize,
    max_count: usize,
) -> Result<Vec<Snapshot>> {
    if trajectory.is_empty() {
        return Err(CoreError::EmptyTrajectory);
    }
    if stride == 0 {
        return Err(CoreError::InvalidArgument("stride must be >= 1".into()));
    }
    Ok(trajectory
        .frames
        .iter()
        .step_by(stride)
        .take(max_count)
        .map(|f| Snapshot {
            coords: f.coords.clone(),
            energy: f.energy,
            source_step: f.step,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_trajectory(n: usize) -> Trajectory {
        Trajectory {
            frames: (0..n)
                .map(|i| Frame {
                    step: i,
                    coords: vec![i as f64],
                    energy: i as f64,
                })
                .collect(),
            state: ThermoState::new(1.0).unwrap(),
            lambda: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn stride_ten_over_hundred_frames() {
        let t = fake_trajectory(100);
        let snaps = draw_snapshots(&t, 10, usize::MAX).unwrap();
        assert_eq!(snaps.len(), 10);
        let steps: Vec<usize> = snaps.iter().map(|s| s.source_step).collect();
        assert_eq!(steps, vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
    }

    #[test]
    fn cap_respected() {
        let t = fake_trajectory(5000);
        let snaps = draw_snapshots(&t, 1, 2000).unwrap();
        assert_eq!(snaps.len(), 2000);
        assert_eq!(snaps[0].source_step, 0);
        assert_eq!(snaps[1999].source_step, 1999);
    }

    #[test]
    fn stride_beyond_length_gives_first_frame() {
        let t = fake_trajectory(7);
        let snaps = draw_snapshots(&t, 100, 10).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].source_step, 0);
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let t = Trajectory {
            frames: vec![],
            state: ThermoState::new(1.0).unwrap(),
            lambda: 0.0,
            seed: 0,
        };
        assert!(draw_snapshots(&t, 1, 10).is_err());
    }
}
