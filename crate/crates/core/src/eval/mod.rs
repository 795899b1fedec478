//! Downstream evaluation of learned latents and effect estimation.
//!
//! Identification is scored operationally: a latent block should predict the parameters
//! it is meant to carry (held-out classification and regression) and nothing else.
//! AIPW estimates average treatment effects with latents as covariates.

mod causal;
mod logistic;
mod partition;
mod regress;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng;

pub use causal::{aipw_ate, aipw_ate_with, ate_trend, isotonic_increasing, AteResult, AteSlice, AteTrend, PROPENSITY_CLIP, POSITIVITY_WARN_FRACTION};
pub use logistic::{logistic_fit, logistic_predict, LogisticModel, LOGISTIC_L2};
pub use partition::{discretize_at_median, partition_accuracy, PartitionAccuracyMatrix};
pub use regress::{latent_r2, R2Report, KERNEL_RIDGE};

/// Fraction of rows used for fitting in held-out evaluations.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Seeded 80/20 split of `0..n` into (train, test), each sorted.
pub fn train_test_split(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid("a held-out split needs at least 2 rows"));
    }
    let perm = rng::permutation(n, &mut rng::rng_from(rng::stage_seed(seed, "split")));
    let n_train = ((n as f64 * TRAIN_FRACTION).round() as usize).clamp(1, n - 1);
    let (mut train, mut test) = (perm[..n_train].to_vec(), perm[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub(crate) fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Column means and population standard deviations; a near-zero spread maps to 1.
pub(crate) fn column_stats(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    x.column_iter()
        .map(|c| {
            let m = c.sum() / n;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, if sd > 1e-12 { sd } else { 1.0 })
        })
        .unzip()
}

pub(crate) fn standardize(x: &DMatrix<f64>, mean: &[f64], std: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - mean[j]) / std[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (a, b) = train_test_split(100, 3).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(train_test_split(100, 3).unwrap(), (a.clone(), b));
        assert_ne!(train_test_split(100, 4).unwrap().0, a);
    }
}
