//! Trajectory CSV format: header `step,lambda,energy,x0,x1,...` with one row
//! per frame; coordinates are flattened particle-major.

use crate::error::{CoreError, Result};
use crate::model::ThermoState;
use crate::sampling::{Frame, Trajectory};
use std::io::Write;
use std::path::Path;

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let n_coords = trajectory
        .frames
        .first()
        .map(|f| f.coords.len())
        .unwrap_or(0);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "step,lambda,energy")?;
    for c in 0..n_coords {
        write!(out, ",x{c}")?;
    }
    writeln!(out)?;
    for f in &trajectory.frames {
        write!(out, "{},{:.17e},{:.17e}", f.step, trajectory.lambda, f.energy)?;
        for x in &f.coords {
            write!(out, ",{x:.17e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path, state: ThermoState, seed: u64) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CoreError::EmptyTrajectory)?;
    if !header.starts_with("step,lambda,energy") {
        return Err(CoreError::Parse {
            line: 1,
            message: format!("unexpected header: {header}"),
        });
    }
    let mut frames = Vec::new();
    let mut lambda = 0.0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(CoreError::Parse {
                line: idx + 1,
                message: "fewer than three fields".into(),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| CoreError::Parse {
                line: idx + 1,
                message: format!("{s:?}: {e}"),
            })
        };
        let step = fields[0].parse::<usize>().map_err(|e| CoreError::Parse {
            line: idx + 1,
            message: format!("step {:?}: {e}", fields[0]),
        })?;
        lambda = parse(fields[1])?;
        let energy = parse(fields[2])?;
        let coords = fields[3..]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<Vec<f64>>>()?;
        frames.push(Frame {
            step,
            coords,
            energy,
        });
    }
    Ok(Trajectory {
        frames,
        state,
        lambda,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let traj = Trajectory {
            frames: vec![
                Frame {
                    step: 10,
                    coords: vec![0.1, -0.25, 1.0 / 3.0],
                    energy: 1.5e-3,
                },
                Frame {
                    step: 11,
                    coords: vec![0.2, 0.0, -7.125],
                    energy: -2.0,
                },
            ],
            state: ThermoState::new(1.0).unwrap(),
            lambda: 0.75,
            seed: 42,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path, traj.state, traj.seed).unwrap();
        assert_eq!(traj, back);
    }
}
