use super::lm::{levenberg_marquardt, LmOptions};
use super::nelder_mead::{nelder_mead, NmOptions};
use super::{FitMethod, FitResult};
use crate::error::{Error, Result};
use crate::rng;
use crate::solver::{integrate_with_step, default_substep, Trajectory};
use crate::systems::OdeSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub lm: LmOptions,
    pub nm: NmOptions,
    /// Uniform restarts in the box on top of `theta0`; `None` means 5 for chaotic systems, 0 otherwise.
    pub restarts: Option<usize>,
    pub restart_seed: u64,
    /// Internal integration step for trajectory matching; defaults to the integrator default.
    pub h_int: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lm: LmOptions::default(),
            nm: NmOptions::default(),
            restarts: None,
            restart_seed: 0,
            h_int: None,
        }
    }
}

impl FitOptions {
    fn restarts_for(&self, system: &OdeSystem) -> usize {
        self.restarts.unwrap_or(if system.chaotic { 5 } else { 0 })
    }
}

fn check_traj(system: &OdeSystem, traj: &Trajectory, theta0: &[f64]) -> Result<()> {
    if traj.state_dim() != system.state_dim {
        return Err(Error::invalid(format!(
            "trajectory has state dimension {}, system `{}` expects {}",
            traj.state_dim(),
            system.id,
            system.state_dim
        )));
    }
    if theta0.len() != system.param_dim || theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "theta0 must be a finite vector of length {}",
            system.param_dim
        )));
    }
    if traj.len() < 2 {
        return Err(Error::invalid(format!("fitting needs at least 2 grid points, got {}", traj.len())));
    }
    Ok(())
}

pub fn fit_derivative_matching(system: &OdeSystem, traj: &Trajectory, theta0: &[f64]) -> Result<FitResult> {
    fit_derivative_matching_with(system, traj, theta0, &FitOptions::default())
}

/// Levenberg-Marquardt on `Σ_t ‖f_θ(x_t) − ẋ_t‖²`.
pub fn fit_derivative_matching_with(
    system: &OdeSystem,
    traj: &Trajectory,
    theta0: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_traj(system, traj, theta0)?;
    let derivs = traj
        .derivs()
        .ok_or_else(|| Error::invalid("derivative matching needs a derivative channel"))?;
    let d = system.state_dim;
    let residual = |theta: &[f64]| -> Option<Vec<f64>> {
        let mut out = vec![0.0; derivs.len()];
        for t in 0..traj.len() {
            let slot = &mut out[t * d..(t + 1) * d];
            system.eval_into(theta, traj.state(t), slot);
            for (o, dx) in slot.iter_mut().zip(&derivs[t * d..(t + 1) * d]) {
                *o -= dx;
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    };
    if residual(theta0).is_none() {
        return Err(system.numeric_error(format!("non-finite field along the trajectory at theta0 = {theta0:?}")));
    }
    let out = levenberg_marquardt(residual, theta0, None, &opts.lm)?;
    Ok(FitResult {
        theta_hat: out.theta,
        loss_final: out.loss,
        method: FitMethod::DerivativeMatching,
        iterations: out.iterations,
        converged: out.converged,
    })
}

fn simulate_residual(system: &OdeSystem, traj: &Trajectory, theta: &[f64], h_int: f64) -> Option<Vec<f64>> {
    let sim = integrate_with_step(system, theta, traj.state(0), traj.grid(), h_int).ok()?;
    Some(sim.states().iter().zip(traj.states()).map(|(a, b)| a - b).collect())
}

/// `‖F(θ) − x‖²`, integrating from the first observed state on the trajectory's own grid.
pub fn trajectory_objective(system: &OdeSystem, traj: &Trajectory, theta: &[f64]) -> Result<f64> {
    check_traj(system, traj, theta)?;
    let sim = integrate_with_step(system, theta, traj.state(0), traj.grid(), default_substep(traj.grid()))?;
    Ok(sim.states().iter().zip(traj.states()).map(|(a, b)| (a - b).powi(2)).sum())
}

pub fn fit_trajectory_matching(system: &OdeSystem, traj: &Trajectory, theta0: &[f64]) -> Result<FitResult> {
    fit_trajectory_matching_with(system, traj, theta0, &FitOptions::default())
}

/// Minimize the trajectory objective inside the parameter box: projected LM from each
/// start, falling back to projected Nelder-Mead when LM stalls. Chaotic systems get
/// uniform restarts; the best start wins.
pub fn fit_trajectory_matching_with(
    system: &OdeSystem,
    traj: &Trajectory,
    theta0: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_traj(system, traj, theta0)?;
    let h_int = opts.h_int.unwrap_or_else(|| default_substep(traj.grid()));
    let bounds = &system.param_box;
    let residual = |theta: &[f64]| simulate_residual(system, traj, theta, h_int);
    let objective = |theta: &[f64]| residual(theta).map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum());

    let mut starts = vec![theta0.to_vec()];
    let mut rs = rng::rng_from(opts.restart_seed);
    for _ in 0..opts.restarts_for(system) {
        starts.push(bounds.sample(&mut rs));
    }

    let mut best: Option<FitResult> = None;
    for start in &starts {
        let Ok(lm) = levenberg_marquardt(residual, start, Some(bounds), &opts.lm) else {
            continue;
        };
        let candidate = if lm.converged {
            FitResult {
                theta_hat: lm.theta,
                loss_final: lm.loss,
                method: FitMethod::TrajectoryMatching,
                iterations: lm.iterations,
                converged: true,
            }
        } else {
            let nm = nelder_mead(objective, &lm.theta, Some(bounds), &opts.nm);
            let (theta_hat, loss_final) = if nm.loss <= lm.loss { (nm.theta, nm.loss) } else { (lm.theta, lm.loss) };
            FitResult {
                theta_hat,
                loss_final,
                method: FitMethod::TrajectoryMatching,
                iterations: lm.iterations + nm.iterations,
                converged: nm.converged,
            }
        };
        if best.as_ref().is_none_or(|b| candidate.loss_final < b.loss_final) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| {
        Error::EstimationFailure(format!(
            "`{}`: integration failed from every start ({} tried)",
            system.id,
            starts.len()
        ))
    })
}
