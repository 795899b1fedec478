use dynident::estim::{
    benchmark_rmse, fit_closed_form, trajectory_objective, with_estimated_derivatives, BenchConfig, FitMethod,
};
use dynident::rng;
use dynident::solver::{integrate, TimeGrid};
use dynident::systems::{catalog, lookup, sample_parameters};

use crate::Outcome;

const TABLE_ROWS: [&str; 10] = ["ode2", "ode3", "ode5", "ode6", "ode24", "ode25", "ode27", "ode28", "ode31", "ode50"];

pub fn rmse_table() -> Outcome {
    let cfg = BenchConfig::new(TABLE_ROWS.iter().map(|s| s.to_string()).collect(), 100, FitMethod::DerivativeMatching, 7);
    let reports = benchmark_rmse(&cfg).unwrap();
    let mut pass = true;
    let mut cells = Vec::new();
    for r in &reports {
        let d = lookup(&r.system_id).unwrap().state_dim;
        let bound = if d == 1 { 1e-3 } else { 5e-2 };
        let ok = r.failures == 0 && r.rmse_mean <= bound;
        pass &= ok;
        cells.push(format!("{}={:.1e}{}", r.system_id, r.rmse_mean, if ok { "" } else { "!" }));
    }
    Outcome::check(pass, format!("rmse_mean {}", cells.join(" ")))
}

pub fn lorenz() -> Outcome {
    let n = 100;
    let cfg = BenchConfig::new(vec!["ode56".into()], n, FitMethod::TrajectoryMatching, 7);
    let r = &benchmark_rmse(&cfg).unwrap()[0];
    let fail_rate = r.failures as f64 / n as f64;
    Outcome::check(
        r.rmse_mean <= 0.5 && fail_rate <= 0.2,
        format!("{n} draws on [0, 2]: rmse_mean {:.2e} ± {:.1e}, failure rate {:.2}", r.rmse_mean, r.rmse_std, fail_rate),
    )
}

pub fn closed_form() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    let mut worst_est: f64 = 0.0;
    let mut systems = Vec::new();
    for sys in catalog().iter().filter(|s| s.is_linear_in_theta()) {
        systems.push(sys.id.clone());
        let exact_grid = TimeGrid::uniform(0.0, sys.t_max, sys.grid_points).unwrap();
        let fine_len = (sys.t_max / 0.01).round() as usize + 1;
        let fine_grid = TimeGrid::uniform(0.0, sys.t_max, fine_len).unwrap();
        for draw in sample_parameters(sys, 50, rng::stage_seed(3, &sys.id)).unwrap() {
            let inf = |theta_hat: &[f64]| {
                theta_hat.iter().zip(&draw.theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            };
            let tr = integrate(sys, &draw.theta, &sys.initial_state, &exact_grid).unwrap();
            worst_exact = worst_exact.max(inf(&fit_closed_form(sys, &tr).unwrap().theta_hat));
            let tr = integrate(sys, &draw.theta, &sys.initial_state, &fine_grid).unwrap();
            let tr = with_estimated_derivatives(tr).unwrap();
            worst_est = worst_est.max(inf(&fit_closed_form(sys, &tr).unwrap().theta_hat));
        }
    }
    Outcome::check(
        worst_exact <= 1e-8 && worst_est <= 1e-3,
        format!(
            "{} x 50 draws: max inf-error {:.1e} (analytic, <= 1e-8), {:.1e} (estimated at h=0.01, <= 1e-3)",
            systems.join(","),
            worst_exact,
            worst_est
        ),
    )
}

pub fn zero_loss() -> Outcome {
    let mut ties = 0;
    let mut violations = Vec::new();
    for sys in catalog() {
        let grid = TimeGrid::uniform(0.0, sys.t_max, sys.grid_points).unwrap();
        let mut sys_ties = 0;
        for draw in sample_parameters(sys, 10, rng::stage_seed(4, &sys.id)).unwrap() {
            let tr = integrate(sys, &draw.theta, &sys.initial_state, &grid).unwrap();
            let at_truth = trajectory_objective(sys, &tr, &draw.theta).unwrap();
            let probes = sample_parameters(sys, 50, rng::item_seed(rng::stage_seed(40, &sys.id), draw.draw_index as u64)).unwrap();
            for p in probes {
                // a divergent probe has an infinite objective
                let other = trajectory_objective(sys, &tr, &p.theta).unwrap_or(f64::INFINITY);
                if other <= at_truth {
                    sys_ties += 1;
                }
            }
        }
        if sys_ties > 1 {
            violations.push(format!("{}:{}", sys.id, sys_ties));
        }
        ties += sys_ties;
    }
    Outcome::check(
        violations.is_empty(),
        format!(
            "{} systems x 10 draws x 50 probes: {} ties/violations total{}",
            catalog().len(),
            ties,
            if violations.is_empty() { String::new() } else { format!(", over limit: {}", violations.join(" ")) }
        ),
    )
}
