use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic_fit;
use super::regress::Ridge;
use crate::error::{Error, Result};

/// Propensities are clipped to this interval.
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);
/// A clipped fraction above this attaches a positivity warning.
pub const POSITIVITY_WARN_FRACTION: f64 = 0.2;
/// Ridge penalty of the per-arm outcome regressions (standardized covariates).
const OUTCOME_RIDGE: f64 = 1e-6;
const MIN_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub ate_hat: f64,
    /// Standard deviation of the influence values over `√n`.
    pub se_hat: f64,
    pub n: usize,
    pub clipped_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Doubly robust ATE with one covariate set for both nuisance models.
pub fn aipw_ate(y: &[f64], t: &[bool], x: &DMatrix<f64>) -> Result<AteResult> {
    aipw_ate_with(y, t, x, x)
}

/// AIPW with separate covariates for the propensity model and the outcome models.
///
/// The propensity `ê` is a logistic regression on `x_propensity`; `μ̂₀`, `μ̂₁` are ridge
/// regressions on `x_outcome` fitted within each arm. There is no cross-fitting.
pub fn aipw_ate_with(y: &[f64], t: &[bool], x_propensity: &DMatrix<f64>, x_outcome: &DMatrix<f64>) -> Result<AteResult> {
    let n = y.len();
    if t.len() != n || x_propensity.nrows() != n || x_outcome.nrows() != n {
        return Err(Error::invalid("outcomes, treatments and covariates must have the same rows"));
    }
    if n < MIN_ROWS {
        return Err(Error::invalid(format!("AIPW needs at least {MIN_ROWS} rows, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("outcomes must be finite"));
    }
    let treated: Vec<usize> = (0..n).filter(|&i| t[i]).collect();
    let control: Vec<usize> = (0..n).filter(|&i| !t[i]).collect();
    if treated.is_empty() || control.is_empty() {
        return Err(Error::invalid("both treatment arms must be present"));
    }

    let labels: Vec<usize> = t.iter().map(|&b| usize::from(b)).collect();
    let prop = logistic_fit(x_propensity, &labels)?.predict_proba(x_propensity)?;
    let (lo, hi) = PROPENSITY_CLIP;
    let mut clipped = 0usize;
    let e: Vec<f64> = (0..n)
        .map(|i| {
            let p = prop[(i, 1)];
            if !(lo..=hi).contains(&p) {
                clipped += 1;
            }
            p.clamp(lo, hi)
        })
        .collect();

    let arm = |rows: &[usize]| -> Result<Vec<f64>> {
        let xa = super::select_rows(x_outcome, rows);
        let ya: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        Ok(Ridge::fit(&xa, &ya, OUTCOME_RIDGE)?.predict(x_outcome))
    };
    let (mu1, mu0) = (arm(&treated)?, arm(&control)?);

    let psi: Vec<f64> = (0..n)
        .map(|i| {
            let ti = if t[i] { 1.0 } else { 0.0 };
            mu1[i] - mu0[i] + ti * (y[i] - mu1[i]) / e[i] - (1.0 - ti) * (y[i] - mu0[i]) / (1.0 - e[i])
        })
        .collect();
    let nf = n as f64;
    let ate_hat = psi.iter().sum::<f64>() / nf;
    let var = psi.iter().map(|v| (v - ate_hat).powi(2)).sum::<f64>() / (nf - 1.0);
    let clipped_fraction = clipped as f64 / nf;
    let warning = (clipped_fraction > POSITIVITY_WARN_FRACTION).then(|| {
        format!(
            "positivity: {:.1}% of propensities clipped to [{lo}, {hi}]",
            100.0 * clipped_fraction
        )
    });
    Ok(AteResult {
        ate_hat,
        se_hat: (var / nf).sqrt(),
        n,
        clipped_fraction,
        warning,
    })
}

/// One slice of an effect trend, e.g. one period, with latents as covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct AteSlice {
    pub label: String,
    pub y: Vec<f64>,
    pub t: Vec<bool>,
    pub x: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteTrend {
    pub labels: Vec<String>,
    pub results: Vec<AteResult>,
    /// `(ATE_k − ATE_0) / ATE_0`.
    pub change_ratios: Vec<f64>,
    /// Nondecreasing least-squares fit of `change_ratios`.
    pub isotonic: Vec<f64>,
}

/// AIPW per slice and change ratios relative to the first slice.
pub fn ate_trend(slices: &[AteSlice]) -> Result<AteTrend> {
    if slices.len() < 2 {
        return Err(Error::invalid("an ATE trend needs at least 2 slices"));
    }
    let results = slices
        .par_iter()
        .map(|s| aipw_ate(&s.y, &s.t, &s.x))
        .collect::<Result<Vec<_>>>()?;
    let base = results[0].ate_hat;
    if base == 0.0 {
        return Err(Error::invalid("baseline ATE is exactly zero; change ratios are undefined"));
    }
    let change_ratios: Vec<f64> = results.iter().map(|r| (r.ate_hat - base) / base).collect();
    Ok(AteTrend {
        labels: slices.iter().map(|s| s.label.clone()).collect(),
        isotonic: isotonic_increasing(&change_ratios),
        results,
        change_ratios,
    })
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (unit weights).
pub fn isotonic_increasing(values: &[f64]) -> Vec<f64> {
    // (mean, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, c2) = blocks[blocks.len() - 1];
            let (m1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m1 * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64, c1 + c2));
        }
    }
    blocks.iter().flat_map(|&(m, c)| std::iter::repeat_n(m, c)).collect()
}
