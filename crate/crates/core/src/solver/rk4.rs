//! Classical fixed-step fourth-order Runge-Kutta.

use super::{TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::systems::OdeSystem;

/// Integration stops with a divergence error once `‖x‖₂` exceeds this bound.
pub const OVERFLOW_GUARD: f64 = 1e8;

/// Default internal step: `(t_max - t0) / (50 · T)`.
pub fn default_substep(grid: &TimeGrid) -> f64 {
    (grid.t_max() - grid.t0()) / (50.0 * grid.len() as f64)
}

/// Integrate `f_θ` from `x0` at `grid[0]` and record states and field values at every grid point.
pub fn integrate(system: &OdeSystem, theta: &[f64], x0: &[f64], grid: &TimeGrid) -> Result<Trajectory> {
    integrate_with_step(system, theta, x0, grid, default_substep(grid))
}

/// [`integrate`] with an explicit internal step `h_int`. Each grid interval is split into
/// `ceil(Δt / h_int)` equal substeps so grid points are hit exactly.
pub fn integrate_with_step(
    system: &OdeSystem,
    theta: &[f64],
    x0: &[f64],
    grid: &TimeGrid,
    h_int: f64,
) -> Result<Trajectory> {
    system.check_dims(theta, x0)?;
    if theta.iter().chain(x0).any(|v| !v.is_finite()) {
        return Err(Error::invalid("theta and initial state must be finite"));
    }
    let d = system.state_dim;
    let t_len = grid.len();
    if t_len > 1 && !(h_int > 0.0 && h_int.is_finite()) {
        return Err(Error::invalid(format!("internal step must be positive, got {h_int}")));
    }

    let mut states = Vec::with_capacity(t_len * d);
    let mut derivs = Vec::with_capacity(t_len * d);
    let mut x = x0.to_vec();
    let mut f = vec![0.0; d];
    let mut stepper = Rk4::new(d);

    let record = |x: &[f64], f: &mut [f64], states: &mut Vec<f64>, derivs: &mut Vec<f64>, t: f64| -> Result<()> {
        system.eval_into(theta, x, f);
        if f.iter().any(|v| !v.is_finite()) {
            return Err(system.numeric_error(format!("non-finite field at t = {t}")));
        }
        states.extend_from_slice(x);
        derivs.extend_from_slice(f);
        Ok(())
    };

    let pts = grid.points();
    record(&x, &mut f, &mut states, &mut derivs, pts[0])?;
    for k in 1..t_len {
        let (a, b) = (pts[k - 1], pts[k]);
        let n_sub = ((b - a) / h_int - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / n_sub as f64;
        for s in 0..n_sub {
            stepper.step(system, theta, &mut x, h);
            let t = a + h * (s + 1) as f64;
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                if x.iter().any(|v| v.is_nan()) {
                    return Err(system.numeric_error(format!("non-finite state at t = {t}")));
                }
                return Err(Error::Divergence {
                    system: system.id.clone(),
                    time: t,
                });
            }
            if norm > OVERFLOW_GUARD {
                return Err(Error::Divergence {
                    system: system.id.clone(),
                    time: t,
                });
            }
        }
        record(&x, &mut f, &mut states, &mut derivs, b)?;
    }

    Trajectory::new(
        system.id.clone(),
        Some(theta.to_vec()),
        grid.clone(),
        states,
        d,
        Some(derivs),
    )
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(d: usize) -> Self {
        Self {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
        }
    }

    fn step(&mut self, system: &OdeSystem, theta: &[f64], x: &mut [f64], h: f64) {
        let d = x.len();
        system.eval_into(theta, x, &mut self.k1);
        for i in 0..d {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        system.eval_into(theta, &self.tmp, &mut self.k2);
        for i in 0..d {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        system.eval_into(theta, &self.tmp, &mut self.k3);
        for i in 0..d {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        system.eval_into(theta, &self.tmp, &mut self.k4);
        for i in 0..d {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}
