use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{column_stats, select_rows, standardize, train_test_split};
use crate::error::{Error, Result};

/// Ridge added to the kernel matrix.
pub const KERNEL_RIDGE: f64 = 1e-3;
/// The bandwidth is the median pairwise distance over at most this many training rows.
const BANDWIDTH_SAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Report {
    /// Held-out R² per target column; may be negative.
    pub per_component: Vec<f64>,
    pub mean: f64,
}

/// Ridge regression with an unpenalized intercept on standardized features.
#[derive(Debug, Clone)]
pub(crate) struct Ridge {
    mean: Vec<f64>,
    std: Vec<f64>,
    intercept: f64,
    coef: Vec<f64>,
}

impl Ridge {
    /// Minimizes `(1/n)‖y − b − Xw‖² + λ‖w‖²`.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || n != y.len() {
            return Err(Error::invalid("ridge needs matching non-empty rows"));
        }
        let (mean, std) = column_stats(x);
        let xs = standardize(x, &mean, &std);
        let ybar = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
        let mut a = xs.transpose() * &xs;
        for i in 0..a.nrows() {
            a[(i, i)] += lambda * n as f64;
        }
        let rhs = xs.transpose() * yc;
        let coef = match a.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => a
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::invalid(format!("ridge solve failed: {e}")))?,
        };
        Ok(Self {
            mean,
            std,
            intercept: ybar,
            coef: coef.iter().copied().collect(),
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                self.intercept
                    + self
                        .coef
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * (x[(i, j)] - self.mean[j]) / self.std[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Affine whitening fitted on training rows: `x ↦ L⁻¹(x − μ)` with `LLᵀ` the covariance.
struct Whitener {
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Whitener {
    fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows() as f64;
        let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
        let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
        let mut cov = centered.transpose() * &centered / n;
        let jitter = 1e-10 * (cov.trace() / cov.nrows() as f64).max(1e-300);
        for i in 0..cov.nrows() {
            cov[(i, i)] += jitter;
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::invalid("latent covariance is not positive definite"))?;
        Ok(Self { mean, chol })
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - self.mean[j]);
        let l = self.chol.l();
        // rows are samples: solve L·wᵀ = xᵀ
        l.solve_lower_triangular(&centered.transpose())
            .expect("Cholesky factor is nonsingular")
            .transpose()
    }
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum()
}

fn median_distance(x: &DMatrix<f64>) -> f64 {
    let m = x.nrows().min(BANDWIDTH_SAMPLE);
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in 0..i {
            d.push(sq_dist(x, i, x, j).sqrt());
        }
    }
    let med = crate::multiview::median_of(&mut d);
    if med > 0.0 && med.is_finite() { med } else { 1.0 }
}

/// Held-out R² of a nonlinear regression from a latent block onto each target column.
///
/// Rows are split 80/20 by `seed`. The block is whitened on the training rows, which
/// makes the score invariant to invertible linear maps of the block. Each target is
/// fitted by least squares on the whitened block plus an RBF kernel ridge correction on
/// the residual (bandwidth by the median heuristic, ridge [`KERNEL_RIDGE`]).
pub fn latent_r2(block: &DMatrix<f64>, targets: &DMatrix<f64>, seed: u64) -> Result<R2Report> {
    let n = block.nrows();
    if targets.nrows() != n || block.ncols() == 0 || targets.ncols() == 0 {
        return Err(Error::invalid("latent block and targets must have matching non-empty rows"));
    }
    if n < 10 {
        return Err(Error::invalid("latent_r2 needs at least 10 rows"));
    }
    let (tr, te) = train_test_split(n, seed)?;
    let wh = Whitener::fit(&select_rows(block, &tr))?;
    let (xtr, xte) = (wh.apply(&select_rows(block, &tr)), wh.apply(&select_rows(block, &te)));
    let bw = median_distance(&xtr);
    let gamma = 0.5 / (bw * bw);
    let mut kmat = DMatrix::from_fn(tr.len(), tr.len(), |i, j| (-gamma * sq_dist(&xtr, i, &xtr, j)).exp());
    for i in 0..tr.len() {
        kmat[(i, i)] += KERNEL_RIDGE;
    }
    let chol = kmat
        .cholesky()
        .ok_or_else(|| Error::invalid("kernel matrix is not positive definite"))?;
    let cross = DMatrix::from_fn(te.len(), tr.len(), |i, j| (-gamma * sq_dist(&xte, i, &xtr, j)).exp());

    let mut per_component = Vec::with_capacity(targets.ncols());
    for c in 0..targets.ncols() {
        let ytr: Vec<f64> = tr.iter().map(|&i| targets[(i, c)]).collect();
        let yte: Vec<f64> = te.iter().map(|&i| targets[(i, c)]).collect();
        let lin = Ridge::fit(&xtr, &ytr, 1e-12)?;
        let resid = DVector::from_iterator(tr.len(), lin.predict(&xtr).iter().zip(&ytr).map(|(p, y)| y - p));
        let alpha = chol.solve(&resid);
        let corr = &cross * alpha;
        let pred: Vec<f64> = lin.predict(&xte).iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
        let mean = yte.iter().sum::<f64>() / yte.len() as f64;
        let ss_tot: f64 = yte.iter().map(|y| (y - mean).powi(2)).sum();
        let ss_res: f64 = yte.iter().zip(&pred).map(|(y, p)| (y - p).powi(2)).sum();
        if ss_tot == 0.0 {
            return Err(Error::invalid(format!("target column {c} is constant on the held-out rows")));
        }
        per_component.push(1.0 - ss_res / ss_tot);
    }
    let mean = per_component.iter().sum::<f64>() / per_component.len() as f64;
    Ok(R2Report { per_component, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn uniform(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::rng_from(seed);
        DMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_map_is_exact() {
        let theta = uniform(500, 2, 1);
        let r = latent_r2(&theta, &theta, 0).unwrap();
        assert!(r.per_component.iter().all(|v| (v - 1.0).abs() <= 1e-6), "{r:?}");
    }

    #[test]
    fn noise_block_scores_low() {
        let theta = uniform(500, 2, 1);
        let r = latent_r2(&uniform(500, 4, 2), &theta, 0).unwrap();
        assert!(r.per_component.iter().all(|&v| v <= 0.1), "{r:?}");
    }

    #[test]
    fn monotone_transform_scores_high() {
        let theta = uniform(500, 2, 3);
        let r = latent_r2(&theta.map(|v| (2.0 * v).tanh()), &theta, 0).unwrap();
        assert!(r.per_component.iter().all(|&v| v >= 0.95), "{r:?}");
    }

    #[test]
    fn invariant_to_invertible_linear_maps() {
        let theta = uniform(400, 2, 5);
        let block = DMatrix::from_fn(400, 3, |i, j| match j {
            0 => theta[(i, 0)].sin(),
            1 => theta[(i, 1)].powi(3),
            _ => 0.3 * theta[(i, 0)] * theta[(i, 1)],
        });
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -1.0, 0.0, 1.0, 3.0, 1.0, -2.0, 0.5]);
        let (r1, r2) = (latent_r2(&block, &theta, 1).unwrap(), latent_r2(&(&block * a), &theta, 1).unwrap());
        for (u, v) in r1.per_component.iter().zip(&r2.per_component) {
            assert!((u - v).abs() <= 0.02, "{r1:?} vs {r2:?}");
        }
    }

    #[test]
    fn ridge_recovers_a_line() {
        let x = DMatrix::from_fn(50, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..50).map(|i| 3.0 - 2.0 * i as f64).collect();
        let m = Ridge::fit(&x, &y, 0.0).unwrap();
        for (p, t) in m.predict(&x).iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
    }
}
