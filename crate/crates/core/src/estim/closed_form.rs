use nalgebra::{DMatrix, DVector};

use super::{FitMethod, FitResult};
use crate::error::{Error, Result};
use crate::solver::{estimate_derivatives, Trajectory};
use crate::systems::{basis_matrix, OdeSystem};

/// Gram matrices with a larger condition number are rejected rather than regularized.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Ordinary least squares `min_θ ‖Φᵀθ − ẋ‖²` over the flattened derivative channel.
///
/// The Gram matrix `ΦΦᵀ` is never formed; its condition number is the squared
/// condition number of the design matrix `Φᵀ`, which is solved through an SVD.
pub fn fit_closed_form(system: &OdeSystem, traj: &Trajectory) -> Result<FitResult> {
    let phi = basis_matrix(system, traj)?;
    let derivs = traj.derivs().ok_or_else(|| {
        Error::invalid("closed-form fit needs a derivative channel (see with_estimated_derivatives)")
    })?;
    let design = phi.transpose();
    let target = DVector::from_column_slice(derivs);

    let svd = design.clone().svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    let s_min = s.min();
    let condition = if s_min > 0.0 { (s_max / s_min).powi(2) } else { f64::INFINITY };
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition });
    }
    let theta = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::EstimationFailure(e.to_string()))?;
    let resid = &design * &theta - &target;
    Ok(FitResult {
        theta_hat: theta.iter().copied().collect(),
        loss_final: resid.norm_squared(),
        method: FitMethod::ClosedForm,
        iterations: 0,
        converged: true,
    })
}

/// Replace the derivative channel with finite-difference estimates from the states.
pub fn with_estimated_derivatives(traj: Trajectory) -> Result<Trajectory> {
    let dx: DMatrix<f64> = estimate_derivatives(&traj)?;
    // row-major T × d to match the states layout
    let flat: Vec<f64> = dx.transpose().iter().copied().collect();
    traj.with_derivs(flat)
}
