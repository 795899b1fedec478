//! Full identification of `θ` when the functional form is known.
//!
//! Three estimators share one result type: the closed-form least-squares solution for
//! linear-in-θ fields, Levenberg-Marquardt derivative matching, and trajectory matching
//! through the integrator. [`benchmark_rmse`] runs them over sampled parameter draws.

mod bench;
mod closed_form;
mod fit;
mod lm;
mod nelder_mead;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bench::{benchmark_rmse, draw_rmses, BenchConfig, DerivativeSource, EstimateReport};
pub use closed_form::{fit_closed_form, with_estimated_derivatives, GRAM_CONDITION_LIMIT};
pub use fit::{
    fit_derivative_matching, fit_derivative_matching_with, fit_trajectory_matching, fit_trajectory_matching_with,
    trajectory_objective, FitOptions,
};
pub use lm::{levenberg_marquardt, LmOptions, LmOutcome};
pub use nelder_mead::{nelder_mead, NmOptions, NmOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    ClosedForm,
    DerivativeMatching,
    TrajectoryMatching,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::ClosedForm => "closed_form",
            FitMethod::DerivativeMatching => "derivative_matching",
            FitMethod::TrajectoryMatching => "trajectory_matching",
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitMethod {
    type Err = Error;

    /// Accepts the CLI short forms `closed`, `deriv`, `traj` and the full names.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" | "closed_form" => Ok(FitMethod::ClosedForm),
            "deriv" | "derivative_matching" => Ok(FitMethod::DerivativeMatching),
            "traj" | "trajectory_matching" => Ok(FitMethod::TrajectoryMatching),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected closed, deriv or traj)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    /// Sum of squared residuals at `theta_hat`.
    pub loss_final: f64,
    pub method: FitMethod,
    pub iterations: usize,
    pub converged: bool,
}
