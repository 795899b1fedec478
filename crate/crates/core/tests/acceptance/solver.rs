use dynident::solver::{integrate_with_step, TimeGrid};
use dynident::systems::lookup;

use crate::Outcome;

/// Harmonic oscillator on [0, 10]: sup-norm error against cos t at h and h/2.
pub fn rk4_order() -> Outcome {
    let sys = lookup("ode24").unwrap();
    let grid = TimeGrid::uniform(0.0, 10.0, 101).unwrap();
    let err = |h: f64| {
        let tr = integrate_with_step(sys, &[1.0], &[1.0, 0.0], &grid, h).unwrap();
        grid.points()
            .iter()
            .enumerate()
            .map(|(k, t)| (tr.state(k)[0] - t.cos()).abs().max((tr.state(k)[1] + t.sin()).abs()))
            .fold(0.0, f64::max)
    };
    let mut ratios = Vec::new();
    for h in [0.1, 0.05] {
        ratios.push(err(h) / err(h / 2.0));
    }
    let pass = ratios.iter().all(|r| (12.0..=20.0).contains(r));
    Outcome::check(pass, format!("error ratios {:.2} (h=0.1) and {:.2} (h=0.05), required in [12, 20]", ratios[0], ratios[1]))
}
