use nalgebra::DMatrix;

use super::Trajectory;
use crate::error::{Error, Result};

/// Second-order finite differences on a uniform grid: central in the interior,
/// one-sided three-point stencils at both ends. Returns a `T × d` matrix.
pub fn estimate_derivatives(traj: &Trajectory) -> Result<DMatrix<f64>> {
    let t_len = traj.len();
    if t_len < 3 {
        return Err(Error::invalid(format!(
            "derivative estimation needs at least 3 grid points, got {t_len}"
        )));
    }
    let h = traj
        .grid()
        .uniform_step()
        .ok_or_else(|| Error::invalid("derivative estimation requires a uniform grid"))?;
    let d = traj.state_dim();
    let x = |t: usize, c: usize| traj.state(t)[c];
    let mut out = DMatrix::zeros(t_len, d);
    for c in 0..d {
        out[(0, c)] = (-3.0 * x(0, c) + 4.0 * x(1, c) - x(2, c)) / (2.0 * h);
        for t in 1..t_len - 1 {
            out[(t, c)] = (x(t + 1, c) - x(t - 1, c)) / (2.0 * h);
        }
        let n = t_len - 1;
        out[(n, c)] = (3.0 * x(n, c) - 4.0 * x(n - 1, c) + x(n - 2, c)) / (2.0 * h);
    }
    Ok(out)
}
