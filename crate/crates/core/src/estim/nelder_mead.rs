//! Nelder-Mead simplex search, projected onto a parameter box.

use crate::systems::ParamBox;

#[derive(Debug, Clone, PartialEq)]
pub struct NmOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below `f_tol · (|f_best| + f_tol)`.
    pub f_tol: f64,
    /// Stop when every vertex lies within `x_tol` (relative) of the best vertex.
    pub x_tol: f64,
    /// Simplex rebuilds around the best vertex after convergence.
    pub rebuilds: usize,
    /// Initial simplex edge as a fraction of the box width (or of `max(|θ_i|, 1)` without a box).
    pub initial_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iter: 2000,
            f_tol: 1e-14,
            x_tol: 1e-10,
            initial_step: 0.05,
            rebuilds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` from `theta0`. Non-finite objective values rank as `+∞`.
///
/// Projection can flatten the simplex against a box face, so after convergence the
/// simplex is rebuilt around the best vertex (at most `rebuilds` times) until a round
/// no longer improves the objective.
pub fn nelder_mead<F>(f: F, theta0: &[f64], bounds: Option<&ParamBox>, opts: &NmOptions) -> NmOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let mut best = simplex_round(&eval, theta0, bounds, opts, opts.max_iter);
    for _ in 0..opts.rebuilds {
        if !best.converged || best.iterations >= opts.max_iter {
            break;
        }
        let budget = opts.max_iter - best.iterations;
        let next = simplex_round(&eval, &best.theta, bounds, opts, budget);
        let improved = next.loss < best.loss - opts.f_tol * (best.loss.abs() + opts.f_tol);
        let iterations = best.iterations + next.iterations;
        if next.loss < best.loss {
            best = NmOutcome { iterations, ..next };
        } else {
            best.iterations = iterations;
        }
        if !improved {
            break;
        }
    }
    best
}

fn simplex_round<E>(eval: &E, theta0: &[f64], bounds: Option<&ParamBox>, opts: &NmOptions, max_iter: usize) -> NmOutcome
where
    E: Fn(&[f64]) -> f64,
{
    let n = theta0.len();
    let project = |x: &mut Vec<f64>| {
        if let Some(b) = bounds {
            b.project(x);
        }
    };

    let mut start = theta0.to_vec();
    project(&mut start);
    let mut simplex = vec![start.clone()];
    for j in 0..n {
        let mut v = start.clone();
        let step = match bounds {
            Some(b) => opts.initial_step * (b.hi()[j] - b.lo()[j]),
            None => opts.initial_step * start[j].abs().max(1.0),
        };
        v[j] += step;
        project(&mut v);
        if v[j] == start[j] {
            v[j] -= step;
            project(&mut v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        let spread_ok = worst.is_finite() && (worst - best) <= opts.f_tol * (best.abs() + opts.f_tol);
        let size_ok = simplex[1..].iter().all(|v| {
            v.iter()
                .zip(&simplex[0])
                .all(|(a, b)| (a - b).abs() <= opts.x_tol * b.abs().max(1.0))
        });
        if spread_ok || size_ok {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect();
            project(&mut p);
            p
        };

        let xr = along(opts.reflection);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(opts.reflection * opts.expansion);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        // outside contraction when the reflection improved on the worst vertex, inside otherwise
        let xc = if fr < values[n] {
            along(opts.reflection * opts.contraction)
        } else {
            along(-opts.contraction)
        };
        let fc = eval(&xc);
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let mut p: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + opts.shrink * (x - b))
                .collect();
            project(&mut p);
            values[i] = eval(&p);
            simplex[i] = p;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NmOutcome {
        theta: simplex[best].clone(),
        loss: values[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let f = |p: &[f64]| (p[0] - 1.0).powi(2) + 3.0 * (p[1] + 0.5).powi(2);
        let out = nelder_mead(f, &[0.0, 0.0], None, &NmOptions::default());
        assert!(out.converged);
        assert!((out.theta[0] - 1.0).abs() < 1e-5 && (out.theta[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_within_budget() {
        let f = |p: &[f64]| 100.0 * (p[1] - p[0] * p[0]).powi(2) + (1.0 - p[0]).powi(2);
        let out = nelder_mead(f, &[-1.2, 1.0], None, &NmOptions::default());
        assert!((out.theta[0] - 1.0).abs() < 1e-4, "{:?}", out);
    }

    #[test]
    fn stays_in_box() {
        let b = ParamBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let f = |p: &[f64]| (p[0] - 2.0).powi(2) + (p[1] - 0.3).powi(2);
        let out = nelder_mead(f, &[0.5, 0.5], Some(&b), &NmOptions::default());
        assert!(b.contains(&out.theta));
        assert!((out.theta[0] - 1.0).abs() < 1e-6 && (out.theta[1] - 0.3).abs() < 1e-5);
    }

    #[test]
    fn non_finite_regions_are_avoided() {
        let f = |p: &[f64]| if p[0] < 0.0 { f64::NAN } else { (p[0] - 0.1).powi(2) };
        let out = nelder_mead(f, &[1.0], None, &NmOptions::default());
        assert!((out.theta[0] - 0.1).abs() < 1e-6);
    }
}
