//! Benchmark report tables: CSV with a fixed column order and a markdown rendering.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estim::{EstimateReport, FitMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Md,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(ReportFormat::Csv),
            Some("md") => Ok(ReportFormat::Md),
            _ => Err(Error::config("out", "report output must end in .csv or .md")),
        }
    }
}

/// One CSV row. `wall_time_s` is left out so reruns are byte-identical; it is kept in
/// the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    system_id: String,
    n_draws: usize,
    rmse_mean: String,
    rmse_std: String,
    failures: usize,
    method: FitMethod,
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() { format!("{v:.16e}") } else { "NaN".into() }
}

/// `m ± s` with one significant digit each, e.g. `2e-2 ± 2e-2`.
pub fn format_pm(mean: f64, std: f64) -> String {
    let one = |v: f64| if v.is_finite() { format!("{v:.0e}") } else { "NaN".into() };
    format!("{} ± {}", one(mean), one(std))
}

pub fn render_csv(reports: &[EstimateReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(Row {
            system_id: r.system_id.clone(),
            n_draws: r.n_draws,
            rmse_mean: fmt_f64(r.rmse_mean),
            rmse_std: fmt_f64(r.rmse_std),
            failures: r.failures,
            method: r.method,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn render_markdown(reports: &[EstimateReport]) -> String {
    let mut s = String::from("| System | Method | RMSE (m ± std) | Failures | Draws |\n|---|---|---|---|---|\n");
    for r in reports {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.system_id,
            r.method.as_str(),
            format_pm(r.rmse_mean, r.rmse_std),
            r.failures,
            r.n_draws
        ));
    }
    s
}

/// Write `reports` in `format`; both renderings read the same values.
pub fn emit_report(reports: &[EstimateReport], format: ReportFormat, path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to emit"));
    }
    let body = match format {
        ReportFormat::Csv => render_csv(reports)?,
        ReportFormat::Md => render_markdown(reports),
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Read a CSV written by [`emit_report`]; `wall_time_s` comes back as NaN.
pub fn read_report_csv(path: &Path) -> Result<Vec<EstimateReport>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let parse = |s: &str| -> Result<f64> {
        if s == "NaN" {
            return Ok(f64::NAN);
        }
        s.parse().map_err(|_| Error::Format(format!("{}: `{s}` is not a number", path.display())))
    };
    r.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            Ok(EstimateReport {
                system_id: row.system_id,
                n_draws: row.n_draws,
                rmse_mean: parse(&row.rmse_mean)?,
                rmse_std: parse(&row.rmse_std)?,
                failures: row.failures,
                method: row.method,
                wall_time_s: f64::NAN,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mean: f64, std: f64) -> EstimateReport {
        EstimateReport {
            system_id: "ode2".into(),
            n_draws: 20,
            rmse_mean: mean,
            rmse_std: std,
            failures: 0,
            method: FitMethod::DerivativeMatching,
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn table_style_rounding() {
        assert_eq!(format_pm(0.0234, 0.0161), "2e-2 ± 2e-2");
        assert_eq!(format_pm(9e-3, 1e-3), "9e-3 ± 1e-3");
        assert_eq!(format_pm(f64::NAN, f64::NAN), "NaN ± NaN");
    }

    #[test]
    fn one_row_csv() {
        let csv = render_csv(&[report(0.0234, 0.0161)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "system_id,n_draws,rmse_mean,rmse_std,failures,method");
    }

    #[test]
    fn csv_and_markdown_share_values() {
        let dir = tempfile::tempdir().unwrap();
        let (c, m) = (dir.path().join("r.csv"), dir.path().join("r.md"));
        let reps = vec![report(0.0234, 0.0161), report(1.25e-5, 3e-6)];
        emit_report(&reps, ReportFormat::Csv, &c).unwrap();
        emit_report(&reps, ReportFormat::Md, &m).unwrap();
        let back = read_report_csv(&c).unwrap();
        for (a, b) in back.iter().zip(&reps) {
            assert_eq!((a.rmse_mean, a.rmse_std), (b.rmse_mean, b.rmse_std));
        }
        assert_eq!(render_markdown(&back), fs::read_to_string(&m).unwrap());
    }

    #[test]
    fn empty_list_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], ReportFormat::Csv, &dir.path().join("x.csv")).is_err());
    }
}
