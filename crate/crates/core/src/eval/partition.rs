use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{logistic_fit, logistic_predict, select_rows, train_test_split};
use crate::error::{Error, Result};
use crate::multiview::PartitionLayout;

/// Held-out accuracy of classifying each factor from each latent block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAccuracyMatrix {
    /// `accuracy[block][factor]` in `[0, 1]`.
    pub accuracy: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Label each value 1 if it exceeds the median of `values`, else 0.
pub fn discretize_at_median(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    let med = crate::multiview::median_of(&mut sorted);
    values.iter().map(|&v| usize::from(v > med)).collect()
}

/// Fit a logistic classifier per (block, factor) on a seeded 80/20 split and report
/// held-out accuracy. A factor whose training labels are constant is predicted as that
/// constant and flagged in `warnings`.
pub fn partition_accuracy(
    latents: &DMatrix<f64>,
    layout: &PartitionLayout,
    factor_labels: &[Vec<usize>],
    seed: u64,
) -> Result<PartitionAccuracyMatrix> {
    layout.validate()?;
    let n = latents.nrows();
    if latents.ncols() != layout.latent_dim {
        return Err(Error::invalid(format!(
            "latents have {} columns, layout expects {}",
            latents.ncols(),
            layout.latent_dim
        )));
    }
    if factor_labels.iter().any(|l| l.len() != n) {
        return Err(Error::invalid("every factor needs one label per latent row"));
    }
    let (tr, te) = train_test_split(n, seed)?;
    let mut warnings = Vec::new();
    let mut accuracy = vec![vec![0.0; factor_labels.len()]; layout.blocks.len()];
    for (f, labels) in factor_labels.iter().enumerate() {
        let ytr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let yte: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
        let constant = ytr.iter().all(|&l| l == ytr[0]);
        if constant {
            warnings.push(format!("factor {f}: degenerate labels (single class in training split)"));
        }
        for (b, block) in layout.blocks.iter().enumerate() {
            let pred = if constant {
                vec![ytr[0]; te.len()]
            } else {
                let x = DMatrix::from_fn(n, block.len(), |i, j| latents[(i, block[j])]);
                let m = logistic_fit(&select_rows(&x, &tr), &ytr)?;
                logistic_predict(&m, &select_rows(&x, &te))?
            };
            let hits = pred.iter().zip(&yte).filter(|(a, b)| a == b).count();
            accuracy[b][f] = hits as f64 / te.len() as f64;
        }
    }
    Ok(PartitionAccuracyMatrix { accuracy, warnings })
}
