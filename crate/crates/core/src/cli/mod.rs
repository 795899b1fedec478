//! The `dynident` command line: argument parsing, config layering, exit codes.
//!
//! Exit code 0 is success, 1 a validation error (bad flags, config or input data) and 2
//! a runtime failure. Every failure ends with one JSON line on stderr.

mod commands;
pub mod config;
pub mod manifest;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::Error;
use crate::estim::{DerivativeSource, FitMethod};

pub use manifest::{FileDigest, RunManifest};
pub use report::{emit_report, format_pm, read_report_csv, ReportFormat};

/// Comma-separated on the command line, a JSON array (or the same string) in configs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        config::split_list(s)
            .iter()
            .map(|p| p.parse().map_err(|_| format!("`{p}` is not a valid list entry")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

impl<'de, T: Deserialize<'de> + FromStr> Deserialize<'de> for List<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Seq(Vec<T>),
            Str(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Seq(v) => Ok(List(v)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Parser)]
#[command(name = "dynident", version, about = "Parameter identification for dynamical systems")]
pub struct Cli {
    /// Worker threads (overrides DYNIDENT_THREADS); 1 guarantees bit-identical output.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threads: Option<i64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    /// JSON config (or a run manifest) for the subcommand; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect the built-in system catalog.
    Systems {
        #[command(subcommand)]
        action: SystemsAction,
    },
    /// Integrate a system and write trajectories as JSON lines.
    Simulate(SimulateArgs),
    /// RMSE benchmark of known-form estimators over sampled parameters.
    Bench(BenchArgs),
    /// Synthesize a multiview dataset.
    SynthMv(SynthArgs),
    /// Train a multiview identifier.
    TrainMv(TrainArgs),
    /// Evaluate a trained identifier on a dataset.
    Eval(EvalArgs),
    /// Render benchmark CSVs as one table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum SystemsAction {
    /// Print id, name, d, N and the linear-in-θ flag as TSV.
    List,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateArgs {
    /// Catalog id, e.g. ode27 (see `systems list`).
    #[arg(long)]
    pub system: Option<String>,
    /// Parameters; when omitted, `draws` vectors are sampled from the box.
    #[arg(long)]
    pub theta: Option<List<f64>>,
    /// Number of sampled parameter vectors [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    pub draws: Option<i64>,
    /// Root seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of Gaussian noise added to the states.
    #[arg(long, allow_negative_numbers = true)]
    pub noise: Option<f64>,
    /// End of the time grid [default: catalog horizon].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Grid points [default: catalog value].
    #[arg(long, allow_negative_numbers = true)]
    pub points: Option<i64>,
    /// Output JSON-lines file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchArgs {
    /// Comma-separated catalog ids.
    #[arg(long)]
    pub systems: Option<List<String>>,
    /// Parameter draws per system [default: 100].
    #[arg(long, allow_negative_numbers = true)]
    pub draws: Option<i64>,
    /// traj, deriv or closed.
    #[arg(long)]
    pub method: Option<FitMethod>,
    /// Standard deviation of Gaussian noise added to the states [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    pub noise: Option<f64>,
    /// Root seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// exact or estimated.
    #[arg(long, value_parser = parse_derivs)]
    pub derivatives: Option<DerivativeSource>,
    /// End of the time grid; requires --points.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Grid points; requires --t-max.
    #[arg(long, allow_negative_numbers = true)]
    pub points: Option<i64>,
    /// Output CSV; a markdown table is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthArgs {
    /// Catalog id.
    #[arg(long)]
    pub system: Option<String>,
    /// Parameter indices shared by views 0 and 1.
    #[arg(long)]
    pub shared: Option<List<usize>>,
    /// Index set shared by views 0 and 2; makes triples.
    #[arg(long)]
    pub secondary: Option<List<usize>>,
    /// Number of records [default: 2000].
    #[arg(long, allow_negative_numbers = true)]
    pub pairs: Option<i64>,
    /// Root seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative jitter of the initial state per view [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    pub jitter: Option<f64>,
    /// Output dataset file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags of `train-mv`; every other training key comes from the config file.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset written by synth-mv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output model file; the loss curve goes to <stem>.loss.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training epochs [default: 100].
    #[arg(long, allow_negative_numbers = true)]
    pub epochs: Option<i64>,
    /// Batch size [default: 64].
    #[arg(long, allow_negative_numbers = true)]
    pub batch: Option<i64>,
    /// Adam learning rate [default: 1e-3].
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    /// Alignment weight [default: 10].
    #[arg(long, allow_negative_numbers = true)]
    pub reg_align: Option<f64>,
    /// Root seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalArgs {
    /// Model file written by train-mv.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset with recorded parameters.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV report path; a markdown summary is written next to it.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Root seed for the held-out split and synthetic outcomes [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of slices in the synthetic-outcome ATE series (0 disables it).
    #[arg(long, allow_negative_numbers = true)]
    pub ate_slices: Option<i64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportArgs {
    /// Benchmark CSVs written by `bench`.
    #[arg(long)]
    pub inputs: Option<List<PathBuf>>,
    /// `.csv` or `.md`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_derivs(s: &str) -> Result<DerivativeSource, String> {
    match s {
        "exact" => Ok(DerivativeSource::Exact),
        "estimated" | "numeric" => Ok(DerivativeSource::Estimated),
        _ => Err(format!("`{s}` is not exact or estimated")),
    }
}

/// 1 for validation errors, 2 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config { .. } | Error::Format(_) | Error::Unsupported(_) => 1,
        _ => 2,
    }
}

fn error_line(kind: &str, message: &str, key: Option<&str>, code: i32) -> String {
    let mut v = serde_json::json!({ "error": kind, "message": message, "exit_code": code });
    if let Some(k) = key {
        v["key"] = serde_json::Value::from(k);
    }
    v.to_string()
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{}", e.render());
                return 0;
            }
            eprint!("{}", e.render());
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line("usage", &first, None, 1));
            return 1;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let key = match &e {
                Error::Config { key, .. } => Some(key.as_str()),
                _ => None,
            };
            eprintln!("{}", error_line(e.kind(), &e.to_string(), key, code));
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parses_from_flags_and_json() {
        let l: List<usize> = "0, 1,2".parse().unwrap();
        assert_eq!(l.0, vec![0, 1, 2]);
        let j: List<usize> = serde_json::from_str("[3,4]").unwrap();
        assert_eq!(j.0, vec![3, 4]);
        let s: List<String> = serde_json::from_str(r#""ode2,ode3""#).unwrap();
        assert_eq!(s.0, vec!["ode2", "ode3"]);
        assert!("1,x".parse::<List<usize>>().is_err());
    }

    #[test]
    fn exit_codes_split_validation_from_runtime() {
        assert_eq!(exit_code(&Error::config("draws", "bad")), 1);
        assert_eq!(
            exit_code(&Error::Divergence {
                system: "x".into(),
                time: 1.0
            }),
            2
        );
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["dynident", "frobnicate"]), 1);
        assert_eq!(run(["dynident", "bench", "--draws", "-1", "--systems", "ode2", "--out", "/nonexistent/x.csv"]), 1);
    }
}
