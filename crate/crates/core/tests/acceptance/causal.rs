use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use dynident::eval::{aipw_ate, aipw_ate_with, ate_trend, AteSlice};
use dynident::rng;

use crate::Outcome;

const N: usize = 10_000;

fn normal(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

fn arm(t: bool) -> f64 {
    if t { 1.0 } else { 0.0 }
}

/// Randomized T, Y = effect·T + ε with ε ~ N(0, 0.1²).
fn randomized(n: usize, effect: f64, seed: u64) -> (Vec<f64>, Vec<bool>, DMatrix<f64>) {
    let mut r = rng::rng_from(seed);
    let x = DMatrix::from_fn(n, 1, |_, _| normal(&mut r));
    let t: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
    let y = t.iter().map(|&ti| effect * arm(ti) + 0.1 * normal(&mut r)).collect();
    (y, t, x)
}

/// X ~ N(0, 1), P(T = 1 | X) = σ(X), Y = 1.5·T + X + ε.
fn confounded(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>, DMatrix<f64>) {
    let mut r = rng::rng_from(seed);
    let x = DMatrix::from_fn(n, 1, |_, _| normal(&mut r));
    let t: Vec<bool> = (0..n).map(|i| r.random_bool(1.0 / (1.0 + (-x[(i, 0)]).exp()))).collect();
    let y = (0..n).map(|i| 1.5 * arm(t[i]) + x[(i, 0)] + normal(&mut r)).collect();
    (y, t, x)
}

pub fn aipw() -> Outcome {
    let (y, t, x) = randomized(N, 2.0, 1);
    let rand = aipw_ate(&y, &t, &x).unwrap();
    let (y, t, x) = confounded(N, 2);
    let conf = aipw_ate(&y, &t, &x).unwrap();
    let sq = x.map(|v| v * v);
    let bad_prop = aipw_ate_with(&y, &t, &sq, &x).unwrap();
    let bad_out = aipw_ate_with(&y, &t, &x, &sq).unwrap();

    let slices: Vec<AteSlice> = (0..6)
        .map(|k| {
            let (y, t, x) = randomized(4000, 1.0 + 0.1 * k as f64, 100 + k);
            AteSlice { label: format!("slice{k}"), y, t, x }
        })
        .collect();
    let trend = ate_trend(&slices).unwrap();
    let monotone = trend.isotonic.windows(2).all(|w| w[0] <= w[1]) && trend.isotonic[5] > trend.isotonic[0];

    let pass = (rand.ate_hat - 2.0).abs() <= 0.05
        && (conf.ate_hat - 1.5).abs() <= 0.1
        && (bad_prop.ate_hat - 1.5).abs() <= 0.15
        && (bad_out.ate_hat - 1.5).abs() <= 0.15
        && monotone;
    Outcome::check(
        pass,
        format!(
            "randomized {:.4} (truth 2.0), confounded {:.4} (truth 1.5), misspecified propensity {:.4}, \
             misspecified outcome {:.4}, drift ratios {:?}",
            rand.ate_hat,
            conf.ate_hat,
            bad_prop.ate_hat,
            bad_out.ate_hat,
            trend.change_ratios.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    )
}
