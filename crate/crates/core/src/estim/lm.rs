//! Levenberg-Marquardt over a residual closure with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::systems::ParamBox;

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub lambda0: f64,
    pub lambda_factor: f64,
    /// Damping beyond this value means no acceptable step exists: the run has stalled.
    pub lambda_max: f64,
    pub max_iter: usize,
    pub step_tol: f64,
    pub loss_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_factor: 10.0,
            lambda_max: 1e16,
            max_iter: 200,
            step_tol: 1e-10,
            loss_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the damping hit `lambda_max` or the Jacobian could not be evaluated.
    pub stalled: bool,
}

fn sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimize `‖r(θ)‖²`. `residual` returns `None` where the model cannot be evaluated;
/// such points are treated as infinitely bad. With `bounds`, every trial point is
/// projected into the box.
pub fn levenberg_marquardt<F>(residual: F, theta0: &[f64], bounds: Option<&ParamBox>, opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = theta0.len();
    let mut theta = theta0.to_vec();
    if let Some(b) = bounds {
        b.project(&mut theta);
    }
    let mut r = residual(&theta).ok_or_else(|| Error::EstimationFailure("residual undefined at the starting point".into()))?;
    let mut loss = sq(&r);
    let mut lambda = opts.lambda0;
    let mut out = LmOutcome {
        theta: theta.clone(),
        loss,
        iterations: 0,
        converged: loss == 0.0,
        stalled: false,
    };
    if out.converged {
        return Ok(out);
    }

    for iter in 1..=opts.max_iter {
        out.iterations = iter;
        let m = r.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut probe = theta.clone();
        for j in 0..n {
            let h = f64::EPSILON.sqrt() * theta[j].abs().max(1.0);
            probe[j] = theta[j] + h;
            let Some(rp) = residual(&probe) else {
                out.stalled = true;
                return Ok(out);
            };
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
            probe[j] = theta[j];
        }
        let rv = DVector::from_column_slice(&r);
        let grad = jac.tr_mul(&rv);
        if grad.iter().all(|g| *g == 0.0) {
            out.converged = true;
            return Ok(out);
        }
        let gram = jac.tr_mul(&jac);
        let diag_floor = gram.diagonal().max() * 1e-12 + f64::MIN_POSITIVE;

        loop {
            let mut a = gram.clone();
            for j in 0..n {
                a[(j, j)] += lambda * gram[(j, j)].max(diag_floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= opts.lambda_factor;
                if lambda > opts.lambda_max {
                    out.stalled = true;
                    return Ok(out);
                }
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let mut trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            if let Some(b) = bounds {
                b.project(&mut trial);
            }
            let step = trial.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rel_step = step / (scale + opts.step_tol);
            if rel_step < opts.step_tol {
                out.converged = true;
                return Ok(out);
            }
            match residual(&trial).map(|rt| (sq(&rt), rt)) {
                Some((lt, rt)) if lt.is_finite() && lt < loss => {
                    let rel_dec = (loss - lt) / loss;
                    theta = trial;
                    r = rt;
                    loss = lt;
                    lambda = (lambda / opts.lambda_factor).max(1e-300);
                    out.theta.clone_from(&theta);
                    out.loss = loss;
                    if loss == 0.0 || rel_dec < opts.loss_tol {
                        out.converged = true;
                        return Ok(out);
                    }
                    break;
                }
                _ => {
                    lambda *= opts.lambda_factor;
                    if lambda > opts.lambda_max {
                        out.stalled = true;
                        return Ok(out);
                    }
                }
            }
        }
    }
    Ok(out)
}
