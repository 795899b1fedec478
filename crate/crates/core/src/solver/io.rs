//! JSON-lines persistence: one trajectory per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRecord {
    pub t0: f64,
    pub t_max: f64,
    #[serde(rename = "T")]
    pub t_len: usize,
    /// Present only for non-uniform grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
}

/// On-disk form of a [`Trajectory`]; `states` and `derivs` are row-major `T × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub system_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub grid: GridRecord,
    pub states: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivs: Option<Vec<f64>>,
}

impl From<&Trajectory> for TrajectoryRecord {
    fn from(tr: &Trajectory) -> Self {
        let grid = tr.grid();
        let reconstructed = TimeGrid::uniform(grid.t0(), grid.t_max(), grid.len()).ok();
        let points = match reconstructed {
            Some(g) if g.points() == grid.points() => None,
            _ => Some(grid.points().to_vec()),
        };
        Self {
            system_id: tr.system_id.clone(),
            theta: tr.theta_truth.clone(),
            grid: GridRecord {
                t0: grid.t0(),
                t_max: grid.t_max(),
                t_len: grid.len(),
                points,
            },
            states: tr.states().to_vec(),
            derivs: tr.derivs().map(<[f64]>::to_vec),
        }
    }
}

impl TryFrom<TrajectoryRecord> for Trajectory {
    type Error = Error;

    fn try_from(rec: TrajectoryRecord) -> Result<Self> {
        let grid = match rec.grid.points {
            Some(points) => {
                if points.len() != rec.grid.t_len {
                    return Err(Error::Format("grid.points length differs from grid.T".into()));
                }
                TimeGrid::from_points(points)?
            }
            None => TimeGrid::uniform(rec.grid.t0, rec.grid.t_max, rec.grid.t_len)?,
        };
        if rec.grid.t_len == 0 || rec.states.len() % rec.grid.t_len != 0 {
            return Err(Error::Format("states length is not a multiple of grid.T".into()));
        }
        let d = rec.states.len() / rec.grid.t_len;
        Trajectory::new(rec.system_id, rec.theta, grid, rec.states, d, rec.derivs)
    }
}

impl Trajectory {
    pub fn to_json_line(&self) -> Result<String> {
        json::to_string(&TrajectoryRecord::from(self))
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: TrajectoryRecord = serde_json::from_str(line)?;
        rec.try_into()
    }
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut out = String::new();
    for tr in trajectories {
        out.push_str(&tr.to_json_line()?);
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            Trajectory::from_json_line(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::integrate;
    use crate::systems::lookup;
    use proptest::prelude::*;

    #[test]
    fn integrated_trajectory_round_trips() {
        let sys = lookup("ode56").unwrap();
        let grid = TimeGrid::uniform(0.0, 2.0, 50).unwrap();
        let tr = integrate(sys, &sys.canonical_theta, &sys.initial_state, &grid).unwrap();
        let line = tr.to_json_line().unwrap();
        assert!(!line.contains('\n'));
        let back = Trajectory::from_json_line(&line).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn unknown_fields_rejected() {
        let line = r#"{"system_id":"x","grid":{"t0":0,"t_max":1,"T":2},"states":[1,2],"extra":1}"#;
        assert!(Trajectory::from_json_line(line).is_err());
    }

    proptest! {
        #[test]
        fn states_round_trip_bit_exact(
            states in proptest::collection::vec(-1e300f64..1e300, 6),
            tmax in 1e-3f64..1e3,
        ) {
            let grid = TimeGrid::uniform(0.0, tmax, 3).unwrap();
            let tr = Trajectory::new("p", Some(vec![states[0]]), grid, states.clone(), 2, Some(states.clone())).unwrap();
            let back = Trajectory::from_json_line(&tr.to_json_line().unwrap()).unwrap();
            prop_assert_eq!(back, tr);
        }
    }
}
