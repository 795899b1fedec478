use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{column_stats, standardize};
use crate::error::{Error, Result};

/// ℓ₂ penalty on the non-intercept weights.
pub const LOGISTIC_L2: f64 = 1e-4;
const MAX_ITER: usize = 2000;
const GRAD_TOL: f64 = 1e-8;

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `(p + 1) × K` row-major; the last row holds the intercepts.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    k: usize,
}

impl Problem<'_> {
    fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Penalized mean cross-entropy and, when `grad` is given, its gradient.
    fn eval(&self, w: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (n, p, k) = (self.x.nrows(), self.p(), self.k);
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut loss = 0.0;
        let mut z = vec![0.0; k];
        for i in 0..n {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc = w[p * k + c] + (0..p).map(|j| self.x[(i, j)] * w[j * k + c]).sum::<f64>();
            }
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
            loss += lse - z[self.y[i]];
            if let Some(g) = grad.as_deref_mut() {
                for c in 0..k {
                    let r = (z[c] - lse).exp() - if c == self.y[i] { 1.0 } else { 0.0 };
                    for j in 0..p {
                        g[j * k + c] += r * self.x[(i, j)];
                    }
                    g[p * k + c] += r;
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        let reg: f64 = w[..p * k].iter().map(|v| v * v).sum();
        if let Some(g) = grad {
            for (idx, gv) in g.iter_mut().enumerate() {
                *gv *= inv_n;
                if idx < p * k {
                    *gv += LOGISTIC_L2 * w[idx];
                }
            }
        }
        loss * inv_n + 0.5 * LOGISTIC_L2 * reg
    }
}

/// Fit by gradient descent with Armijo backtracking from zero weights, so the result is
/// a deterministic function of the data.
pub fn logistic_fit(x: &DMatrix<f64>, labels: &[usize]) -> Result<LogisticModel> {
    if x.nrows() != labels.len() || x.nrows() == 0 {
        return Err(Error::invalid(format!(
            "{} feature rows for {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; k];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::DegenerateLabels("at least two classes must be present".into()));
    }
    let (mean, std) = column_stats(x);
    let xs = standardize(x, &mean, &std);
    let prob = Problem { x: &xs, y: labels, k };
    let dim = (prob.p() + 1) * k;
    let mut w = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut f = prob.eval(&w, Some(&mut g));
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; dim];
    while iterations < MAX_ITER {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let gg: f64 = g.iter().map(|v| v * v).sum();
        step *= 2.0;
        loop {
            for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&g) {
                *t = wi - step * gi;
            }
            let ft = prob.eval(&trial, None);
            if ft <= f - 1e-4 * step * gg {
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        if step < 1e-12 {
            // no further decrease is representable
            converged = true;
            break;
        }
        std::mem::swap(&mut w, &mut trial);
        f = prob.eval(&w, Some(&mut g));
    }
    Ok(LogisticModel {
        n_classes: k,
        mean,
        std,
        weights: w,
        iterations,
        converged,
    })
}

impl LogisticModel {
    /// Class probabilities, `n × K`.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let p = self.mean.len();
        if x.ncols() != p {
            return Err(Error::invalid(format!("model expects {p} features, got {}", x.ncols())));
        }
        let k = self.n_classes;
        let xs = standardize(x, &self.mean, &self.std);
        let mut out = DMatrix::zeros(x.nrows(), k);
        for i in 0..x.nrows() {
            let z: Vec<f64> = (0..k)
                .map(|c| self.weights[p * k + c] + (0..p).map(|j| xs[(i, j)] * self.weights[j * k + c]).sum::<f64>())
                .collect();
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
            for c in 0..k {
                out[(i, c)] = (z[c] - zmax).exp() / s;
            }
        }
        Ok(out)
    }
}

/// Most probable class per row; ties go to the lower class id.
pub fn logistic_predict(model: &LogisticModel, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    let pr = model.predict_proba(x)?;
    Ok(pr
        .row_iter()
        .map(|r| {
            let mut best = 0;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}
