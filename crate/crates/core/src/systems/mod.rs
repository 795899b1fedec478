//! Parameterized ODE systems and the ground-truth sampling side of every experiment.
//!
//! An [`OdeSystem`] couples a vector field `f(θ, x)` with a valid parameter box, a
//! canonical initial condition and horizon, and, when the field is linear in `θ`,
//! the basis functions `φ_i` with `f(θ, x) = Σ θ_i φ_i(x)`.

mod catalog;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::solver::Trajectory;

pub use catalog::{catalog, lookup, CATALOG_VERSION};

/// `(theta, state, out)`: writes `f_θ(x)` into `out`.
pub type FieldFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(state, out)`: writes one basis function's `d`-vector into `out`.
pub type BasisFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Closed per-component sampling box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    /// Strict box: every component must satisfy `lo < hi`.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::check(&lo, &hi, false)?;
        Ok(Self { lo, hi })
    }

    /// Like [`ParamBox::new`] but admits `lo == hi` components.
    pub fn new_allow_degenerate(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::check(&lo, &hi, true)?;
        Ok(Self { lo, hi })
    }

    /// `[lo_frac, hi_frac] · canonical`, componentwise.
    pub fn scaled(canonical: &[f64], lo_frac: f64, hi_frac: f64) -> Result<Self> {
        let (lo, hi) = canonical
            .iter()
            .map(|&c| {
                let (a, b) = (c * lo_frac, c * hi_frac);
                (a.min(b), a.max(b))
            })
            .unzip();
        Self::new(lo, hi)
    }

    fn check(lo: &[f64], hi: &[f64], allow_equal: bool) -> Result<()> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("parameter box bounds must be nonempty and equal length"));
        }
        for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let ok = l.is_finite() && h.is_finite() && (l < h || (allow_equal && l == h));
            if !ok {
                return Err(Error::invalid(format!("parameter box component {i}: [{l}, {h}] is empty")));
            }
        }
        Ok(())
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(t, (l, h))| *t >= *l && *t <= *h)
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (t, (l, h)) in theta.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *t = t.clamp(*l, *h);
        }
    }

    /// One uniform draw from the box.
    pub fn sample(&self, rng: &mut rng::Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { l + (h - l) * rng.random::<f64>() })
            .collect()
    }
}

/// A catalog entry: vector field, dimensions, sampling box and canonical setup.
#[derive(Clone)]
pub struct OdeSystem {
    pub id: String,
    pub name: String,
    pub state_dim: usize,
    pub param_dim: usize,
    field: FieldFn,
    pub param_box: ParamBox,
    basis: Option<Vec<BasisFn>>,
    pub chaotic: bool,
    /// Parameter value the default box is centred on.
    pub canonical_theta: Vec<f64>,
    pub initial_state: Vec<f64>,
    pub t_max: f64,
    /// Default number of grid points over `[0, t_max]`.
    pub grid_points: usize,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("id", &self.id)
            .field("state_dim", &self.state_dim)
            .field("param_dim", &self.param_dim)
            .field("linear_in_theta", &self.is_linear_in_theta())
            .field("chaotic", &self.chaotic)
            .finish()
    }
}

impl OdeSystem {
    /// New system with the default `[0.5, 2]·canonical` box, horizon `[0, 10]` and 100 grid points.
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        state_dim: usize,
        canonical_theta: Vec<f64>,
        initial_state: Vec<f64>,
        field: FieldFn,
    ) -> Result<Self> {
        let param_dim = canonical_theta.len();
        if state_dim == 0 || param_dim == 0 {
            return Err(Error::invalid("state and parameter dimensions must be positive"));
        }
        if initial_state.len() != state_dim {
            return Err(Error::invalid("initial state length differs from state dimension"));
        }
        let param_box = ParamBox::scaled(&canonical_theta, 0.5, 2.0)?;
        Ok(Self {
            id: id.into(),
            name: name.into(),
            state_dim,
            param_dim,
            field,
            param_box,
            basis: None,
            chaotic: false,
            canonical_theta,
            initial_state,
            t_max: 10.0,
            grid_points: 100,
        })
    }

    /// Attach the linear-in-θ basis; one function per parameter.
    pub fn with_basis(mut self, basis: Vec<BasisFn>) -> Self {
        self.basis = Some(basis);
        self
    }

    /// Mark as chaotic and narrow the box to `±rel` around the canonical configuration.
    pub fn chaotic_band(mut self, rel: f64) -> Result<Self> {
        self.param_box = ParamBox::scaled(&self.canonical_theta, 1.0 - rel, 1.0 + rel)?;
        self.chaotic = true;
        Ok(self)
    }

    pub fn with_horizon(mut self, t_max: f64, grid_points: usize) -> Self {
        self.t_max = t_max;
        self.grid_points = grid_points;
        self
    }

    /// Replace the sampling box (degenerate components allowed).
    pub fn with_param_box(mut self, param_box: ParamBox) -> Result<Self> {
        if param_box.dim() != self.param_dim {
            return Err(Error::invalid("parameter box dimension mismatch"));
        }
        self.param_box = param_box;
        Ok(self)
    }

    pub fn is_linear_in_theta(&self) -> bool {
        self.basis.is_some()
    }

    pub fn basis_len(&self) -> Option<usize> {
        self.basis.as_ref().map(Vec::len)
    }

    /// Unchecked evaluation used on hot paths; callers guarantee dimensions.
    #[inline]
    pub(crate) fn eval_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        (self.field)(theta, x, out)
    }

    pub(crate) fn numeric_error(&self, detail: impl Into<String>) -> Error {
        Error::NumericDomain {
            system: self.id.clone(),
            detail: detail.into(),
        }
    }

    pub(crate) fn check_dims(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim {
            return Err(Error::invalid(format!(
                "{}: theta has length {}, expected {}",
                self.id,
                theta.len(),
                self.param_dim
            )));
        }
        if x.len() != self.state_dim {
            return Err(Error::invalid(format!(
                "{}: state has length {}, expected {}",
                self.id,
                x.len(),
                self.state_dim
            )));
        }
        Ok(())
    }

    /// Evaluate each basis function at `x`; row `i` of the result is `φ_i(x)`.
    pub fn eval_basis(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let basis = self.basis.as_ref().ok_or_else(|| {
            Error::Unsupported(format!("system `{}` has no linear-in-theta basis", self.id))
        })?;
        if x.len() != self.state_dim {
            return Err(Error::invalid("state dimension mismatch"));
        }
        Ok(basis
            .iter()
            .map(|phi| {
                let mut out = vec![0.0; self.state_dim];
                phi(x, &mut out);
                out
            })
            .collect())
    }
}

/// `f_θ(x)` with dimension and finiteness checks.
pub fn eval_vector_field(system: &OdeSystem, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    system.check_dims(theta, x)?;
    if theta.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::invalid("theta and state must be finite"));
    }
    let mut out = vec![0.0; system.state_dim];
    system.eval_into(theta, x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(system.numeric_error(format!("non-finite field at x = {x:?}, theta = {theta:?}")));
    }
    Ok(out)
}

/// One sampled parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDraw {
    pub system_id: String,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub draw_index: usize,
}

/// `n` i.i.d. uniform draws from the system's box, a pure function of `(system, n, seed)`.
pub fn sample_parameters(system: &OdeSystem, n: usize, seed: u64) -> Result<Vec<ParameterDraw>> {
    if n == 0 {
        return Err(Error::invalid("number of draws must be at least 1"));
    }
    let mut rng = rng::rng_from(seed);
    Ok((0..n)
        .map(|draw_index| ParameterDraw {
            system_id: system.id.clone(),
            theta: system.param_box.sample(&mut rng),
            seed,
            draw_index,
        })
        .collect())
}

/// Basis functions evaluated along a trajectory: an `m × (T·d)` matrix whose columns are
/// ordered time-major, then by state component (column `t·d + c`).
pub fn basis_matrix(system: &OdeSystem, traj: &Trajectory) -> Result<DMatrix<f64>> {
    let basis = system.basis.as_ref().ok_or_else(|| {
        Error::Unsupported(format!("system `{}` has no linear-in-theta basis", system.id))
    })?;
    let d = system.state_dim;
    if traj.state_dim() != d {
        return Err(Error::invalid("trajectory state dimension differs from system"));
    }
    let t_len = traj.len();
    let mut phi = DMatrix::zeros(basis.len(), t_len * d);
    let mut buf = vec![0.0; d];
    for t in 0..t_len {
        let x = traj.state(t);
        for (i, f) in basis.iter().enumerate() {
            f(x, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                phi[(i, t * d + c)] = *v;
            }
        }
    }
    Ok(phi)
}
