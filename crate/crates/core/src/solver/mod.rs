//! Time grids, trajectories, fixed-step integration, derivative estimation and DCT
//! preprocessing.

mod dct;
mod deriv;
mod io;
mod rk4;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dct::{dct_truncate, idct_expand, kept_coefficients, DctBasis};
pub use deriv::estimate_derivatives;
pub use io::{read_trajectories, write_trajectories, TrajectoryRecord};
pub use rk4::{default_substep, integrate, integrate_with_step, OVERFLOW_GUARD};

/// Strictly increasing sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// `t_len` equally spaced points with exact endpoints.
    pub fn uniform(t0: f64, t_max: f64, t_len: usize) -> Result<Self> {
        if t_len == 0 {
            return Err(Error::invalid("time grid needs at least one point"));
        }
        if t_len == 1 {
            return Self::from_points(vec![t0]).and_then(|g| {
                if t0 == t_max {
                    Ok(g)
                } else {
                    Err(Error::invalid("a one-point grid requires t0 == t_max"))
                }
            });
        }
        if !(t_max > t0) {
            return Err(Error::invalid(format!("time grid requires t_max > t0, got [{t0}, {t_max}]")));
        }
        let step = (t_max - t0) / (t_len - 1) as f64;
        let mut points: Vec<f64> = (0..t_len).map(|k| t0 + step * k as f64).collect();
        points[t_len - 1] = t_max;
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("time grid needs at least one point"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("time grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.points[0]
    }

    pub fn t_max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Common spacing when the grid is uniform to relative tolerance `1e-9`.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let h = (self.t_max() - self.t0()) / (self.points.len() - 1) as f64;
        let tol = 1e-9 * h.abs().max(f64::MIN_POSITIVE);
        self.points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= tol)
            .then_some(h)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::from_points(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.points
    }
}

/// States sampled on a grid, stored row-major as `T × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub system_id: String,
    /// Generating parameters; metadata only, never read by estimators.
    pub theta_truth: Option<Vec<f64>>,
    grid: TimeGrid,
    state_dim: usize,
    states: Vec<f64>,
    derivs: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(
        system_id: impl Into<String>,
        theta_truth: Option<Vec<f64>>,
        grid: TimeGrid,
        states: Vec<f64>,
        state_dim: usize,
        derivs: Option<Vec<f64>>,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if states.len() != grid.len() * state_dim {
            return Err(Error::invalid(format!(
                "states have {} values, expected {} x {}",
                states.len(),
                grid.len(),
                state_dim
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trajectory states must be finite"));
        }
        if let Some(dv) = &derivs {
            if dv.len() != states.len() {
                return Err(Error::invalid("derivative channel shape differs from states"));
            }
        }
        Ok(Self {
            system_id: system_id.into(),
            theta_truth,
            grid,
            state_dim,
            states,
            derivs,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    /// Row-major `T × d` state values.
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn derivs(&self) -> Option<&[f64]> {
        self.derivs.as_deref()
    }

    pub fn with_derivs(mut self, derivs: Vec<f64>) -> Result<Self> {
        if derivs.len() != self.states.len() {
            return Err(Error::invalid("derivative channel shape differs from states"));
        }
        self.derivs = Some(derivs);
        Ok(self)
    }

    pub fn without_derivs(mut self) -> Self {
        self.derivs = None;
        self
    }

    /// Replace the states (e.g. after adding observation noise), keeping derivatives.
    pub fn with_states(mut self, states: Vec<f64>) -> Result<Self> {
        if states.len() != self.states.len() || states.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("replacement states must be finite and keep the shape"));
        }
        self.states = states;
        Ok(self)
    }

    pub fn states_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.state_dim, &self.states)
    }
}
