//! RMSE benchmark over sampled parameter draws.

use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closed_form::{fit_closed_form, with_estimated_derivatives};
use super::fit::{fit_derivative_matching_with, fit_trajectory_matching_with, FitOptions};
use super::FitMethod;
use crate::error::{Error, Result};
use crate::rng;
use crate::solver::{integrate, TimeGrid, Trajectory};
use crate::systems::{lookup, sample_parameters, OdeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    /// Field values at the integrated states.
    Exact,
    /// Finite differences of the (possibly noisy) observed states.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub systems: Vec<String>,
    pub n_draws: usize,
    pub method: FitMethod,
    /// Standard deviation of i.i.d. Gaussian noise added to observed states.
    pub noise: f64,
    pub seed: u64,
    pub derivatives: DerivativeSource,
    /// Overrides the catalog horizon `(t_max, T)`.
    pub horizon: Option<(f64, usize)>,
    pub fit: FitOptions,
}

impl BenchConfig {
    pub fn new(systems: Vec<String>, n_draws: usize, method: FitMethod, seed: u64) -> Self {
        Self {
            systems,
            n_draws,
            method,
            noise: 0.0,
            seed,
            derivatives: DerivativeSource::Exact,
            horizon: None,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub system_id: String,
    pub n_draws: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub failures: usize,
    pub method: FitMethod,
    pub wall_time_s: f64,
}

fn observe(system: &OdeSystem, theta: &[f64], grid: &TimeGrid, cfg: &BenchConfig, noise_seed: u64) -> Result<Trajectory> {
    let mut tr = integrate(system, theta, &system.initial_state, grid)?;
    if cfg.noise > 0.0 {
        let normal = Normal::new(0.0, cfg.noise).map_err(|e| Error::invalid(e.to_string()))?;
        let mut r = rng::rng_from(noise_seed);
        let noisy = tr.states().iter().map(|v| v + normal.sample(&mut r)).collect();
        tr = tr.with_states(noisy)?;
    }
    if cfg.derivatives == DerivativeSource::Estimated {
        tr = with_estimated_derivatives(tr)?;
    }
    Ok(tr)
}

/// Per-draw RMSE `‖θ̂ − θ‖₂ / √N` for one system, in draw order; `None` marks a failed draw.
pub fn draw_rmses(system: &OdeSystem, cfg: &BenchConfig) -> Result<Vec<Option<f64>>> {
    if cfg.n_draws == 0 {
        return Err(Error::invalid("n_draws must be at least 1"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::invalid("noise must be a finite non-negative standard deviation"));
    }
    if cfg.method == FitMethod::ClosedForm && !system.is_linear_in_theta() {
        return Err(Error::Unsupported(format!(
            "closed-form fitting needs a linear-in-theta basis; `{}` has none",
            system.id
        )));
    }
    let (t_max, t_len) = cfg.horizon.unwrap_or((system.t_max, system.grid_points));
    let grid = TimeGrid::uniform(0.0, t_max, t_len)?;
    let draws_seed = rng::stage_seed(cfg.seed, &format!("draws/{}", system.id));
    let noise_stream = rng::stage_seed(cfg.seed, &format!("noise/{}", system.id));
    let restart_stream = rng::stage_seed(cfg.seed, &format!("restarts/{}", system.id));
    let draws = sample_parameters(system, cfg.n_draws, draws_seed)?;
    let theta0 = system.param_box.midpoint();

    Ok(draws
        .par_iter()
        .map(|draw| {
            let i = draw.draw_index as u64;
            let tr = observe(system, &draw.theta, &grid, cfg, rng::item_seed(noise_stream, i)).ok()?;
            let fit = match cfg.method {
                FitMethod::ClosedForm => fit_closed_form(system, &tr),
                FitMethod::DerivativeMatching => fit_derivative_matching_with(system, &tr, &theta0, &cfg.fit),
                FitMethod::TrajectoryMatching => {
                    let mut opts = cfg.fit.clone();
                    opts.restart_seed = rng::item_seed(restart_stream, i);
                    fit_trajectory_matching_with(system, &tr, &theta0, &opts)
                }
            }
            .ok()?;
            let n = draw.theta.len() as f64;
            let rmse = (fit.theta_hat.iter().zip(&draw.theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
            rmse.is_finite().then_some(rmse)
        })
        .collect())
}

/// Mean and population standard deviation of the successful draws.
fn summarize(rmses: &[Option<f64>]) -> (f64, f64, usize) {
    let ok: Vec<f64> = rmses.iter().flatten().copied().collect();
    let failures = rmses.len() - ok.len();
    if ok.is_empty() {
        return (f64::NAN, f64::NAN, failures);
    }
    let n = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / n;
    let var = ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt(), failures)
}

/// One report per system, in the order given. All ids are resolved before any work starts.
pub fn benchmark_rmse(cfg: &BenchConfig) -> Result<Vec<EstimateReport>> {
    if cfg.systems.is_empty() {
        return Err(Error::invalid("no systems given"));
    }
    let systems = cfg.systems.iter().map(|id| lookup(id)).collect::<Result<Vec<_>>>()?;
    systems
        .into_iter()
        .map(|system| {
            let start = Instant::now();
            let rmses = draw_rmses(system, cfg)?;
            let (rmse_mean, rmse_std, failures) = summarize(&rmses);
            Ok(EstimateReport {
                system_id: system.id.clone(),
                n_draws: cfg.n_draws,
                rmse_mean,
                rmse_std,
                failures,
                method: cfg.method,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_draw_has_zero_std() {
        let cfg = BenchConfig::new(vec!["ode2".into()], 1, FitMethod::DerivativeMatching, 4);
        let r = benchmark_rmse(&cfg).unwrap();
        assert_eq!(r[0].rmse_std, 0.0);
        assert_eq!(r[0].failures, 0);
    }

    #[test]
    fn summary_excludes_failures() {
        let (m, s, f) = summarize(&[Some(1.0), None, Some(3.0)]);
        assert_eq!((m, s, f), (2.0, 1.0, 1));
    }

    #[test]
    fn closed_form_needs_basis() {
        let cfg = BenchConfig::new(vec!["ode3".into()], 2, FitMethod::ClosedForm, 4);
        assert_eq!(benchmark_rmse(&cfg).unwrap_err().kind(), "unsupported");
    }

    #[test]
    fn unknown_system_rejected_up_front() {
        let cfg = BenchConfig::new(vec!["ode2".into(), "ode999".into()], 2, FitMethod::DerivativeMatching, 4);
        assert_eq!(benchmark_rmse(&cfg).unwrap_err().kind(), "invalid_argument");
    }

    #[test]
    fn reports_are_deterministic() {
        let mut cfg = BenchConfig::new(vec!["ode6".into()], 5, FitMethod::DerivativeMatching, 9);
        cfg.noise = 1e-3;
        let a = benchmark_rmse(&cfg).unwrap();
        let b = benchmark_rmse(&cfg).unwrap();
        assert_eq!((a[0].rmse_mean, a[0].rmse_std), (b[0].rmse_mean, b[0].rmse_std));
    }
}
