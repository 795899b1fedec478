use crate::error::Result;
use crate::rng;

/// At most this many coordinates are probed per check.
pub const GRADCHECK_MAX_COORDS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because a kink lies within the probe interval.
    pub skipped_kinks: usize,
}

/// Compare the analytic gradient of `f` with central differences of step `h` on a seeded
/// subsample of at most [`GRADCHECK_MAX_COORDS`] coordinates.
///
/// Parameters that are exactly zero are moved by `1e-12` first so ReLU units never sit
/// on their kink. A coordinate whose one-sided slopes disagree, and keep disagreeing at
/// `h/4`, straddles a kink and is skipped. The relative error of a coordinate is
/// `|a − n| / max(|a|, |n|, 1e-6·max(1, |f|))`; the floor keeps round-off-level
/// gradients from dominating.
pub fn gradient_check<F>(mut f: F, params: &[f64], h: f64, seed: u64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut p: Vec<f64> = params.iter().map(|&v| if v == 0.0 { 1e-12 } else { v }).collect();
    let (f0, grad) = f(&p)?;
    let n = p.len();
    let coords: Vec<usize> = if n <= GRADCHECK_MAX_COORDS {
        (0..n).collect()
    } else {
        let mut r = rng::rng_from(seed);
        let mut c = rng::permutation(n, &mut r);
        c.truncate(GRADCHECK_MAX_COORDS);
        c.sort_unstable();
        c
    };
    let floor = 1e-6 * f0.abs().max(1.0);
    let mut eval = |p: &mut Vec<f64>, j: usize, x: f64| -> Result<f64> {
        let keep = p[j];
        p[j] = x;
        let v = f(p)?.0;
        p[j] = keep;
        Ok(v)
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for j in coords {
        let x = p[j];
        let fp = eval(&mut p, j, x + h)?;
        let fm = eval(&mut p, j, x - h)?;
        let fwd = (fp - f0) / h;
        let bwd = (f0 - fm) / h;
        let gap = (fwd - bwd).abs();
        if gap > 1e-3 * fwd.abs().max(bwd.abs()).max(floor) {
            let q = h / 4.0;
            let fwd_q = (eval(&mut p, j, x + q)? - f0) / q;
            let bwd_q = (f0 - eval(&mut p, j, x - q)?) / q;
            // a smooth function shrinks the gap fourfold; a kink does not
            if (fwd_q - bwd_q).abs() > 0.5 * gap {
                report.skipped_kinks += 1;
                continue;
            }
        }
        let numeric = (fp - fm) / (2.0 * h);
        let analytic = grad[j];
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}
