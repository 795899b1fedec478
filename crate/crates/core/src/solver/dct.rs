//! Orthonormal DCT-II along the time axis, truncated to the lowest frequencies.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of coefficients kept: `ceil(keep_fraction · T)`.
pub fn kept_coefficients(t_len: usize, keep_fraction: f64) -> Result<usize> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::invalid(format!("keep_fraction must lie in (0, 1], got {keep_fraction}")));
    }
    if t_len == 0 {
        return Err(Error::invalid("series must have at least one time step"));
    }
    let k = (keep_fraction * t_len as f64 - 1e-9).ceil() as usize;
    Ok(k.clamp(1, t_len))
}

/// Precomputed truncated DCT-II matrix (`K × T`, orthonormal rows).
#[derive(Debug, Clone, PartialEq)]
pub struct DctBasis {
    t_len: usize,
    rows: DMatrix<f64>,
}

impl DctBasis {
    pub fn new(t_len: usize, keep_fraction: f64) -> Result<Self> {
        let keep = kept_coefficients(t_len, keep_fraction)?;
        let n = t_len as f64;
        let rows = DMatrix::from_fn(keep, t_len, |k, t| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale * (PI * k as f64 * (2.0 * t as f64 + 1.0) / (2.0 * n)).cos()
        });
        Ok(Self { t_len, rows })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn kept(&self) -> usize {
        self.rows.nrows()
    }

    /// `T × d` series to `K × d` coefficients.
    pub fn forward(&self, series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if series.nrows() != self.t_len {
            return Err(Error::invalid(format!(
                "series has {} time steps, basis expects {}",
                series.nrows(),
                self.t_len
            )));
        }
        Ok(&self.rows * series)
    }

    /// `K × d` coefficients to a `T × d` series (missing frequencies are zero).
    pub fn inverse(&self, coeffs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if coeffs.nrows() != self.kept() {
            return Err(Error::invalid("coefficient count differs from basis"));
        }
        Ok(self.rows.transpose() * coeffs)
    }

    /// Forward transform of one row-major `T × d` buffer, written row-major `K × d`.
    pub fn forward_flat(&self, series: &[f64], d: usize, out: &mut [f64]) {
        let keep = self.kept();
        debug_assert_eq!(series.len(), self.t_len * d);
        debug_assert_eq!(out.len(), keep * d);
        for k in 0..keep {
            for c in 0..d {
                let mut acc = 0.0;
                for t in 0..self.t_len {
                    acc += self.rows[(k, t)] * series[t * d + c];
                }
                out[k * d + c] = acc;
            }
        }
    }
}

/// Orthonormal DCT-II of each column, keeping the lowest `ceil(keep_fraction · T)` frequencies.
pub fn dct_truncate(series: &DMatrix<f64>, keep_fraction: f64) -> Result<DMatrix<f64>> {
    DctBasis::new(series.nrows(), keep_fraction)?.forward(series)
}

/// Zero-pad `coeffs` to `t_len` frequencies and invert.
pub fn idct_expand(coeffs: &DMatrix<f64>, t_len: usize) -> Result<DMatrix<f64>> {
    if coeffs.nrows() == 0 || coeffs.nrows() > t_len {
        return Err(Error::invalid("coefficient count must lie in 1..=T"));
    }
    let basis = DctBasis::new(t_len, 1.0)?;
    let full = basis.rows.rows(0, coeffs.nrows()).transpose();
    Ok(full * coeffs)
}
