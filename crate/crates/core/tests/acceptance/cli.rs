use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dynident::cli::manifest::{manifest_path, RunManifest};

use crate::Outcome;

const BIN: &str = env!("CARGO_BIN_EXE_dynident");

fn dynident(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN).arg("--threads").arg("1").args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

struct Stage {
    command: &'static str,
    /// Flag naming the primary output; the replay overrides it.
    out_flag: &'static str,
    out: &'static str,
    args: Vec<String>,
    /// Files written besides the primary output.
    extra: &'static [&'static str],
}

fn stages(dir: &Path) -> Vec<Stage> {
    let p = |f: &str| dir.join(f).display().to_string();
    let train_cfg = dir.join("train.json");
    fs::write(
        &train_cfg,
        r#"{"schema_version": 1, "layout": {"latent_dim": 6, "blocks": [[0, 1, 2, 3], [4, 5]], "shared_block": 0}, "hidden_dim": 16, "depth": 2, "batch": 32}"#,
    )
    .unwrap();
    vec![
        Stage {
            command: "simulate",
            out_flag: "--out",
            out: "sim.jsonl",
            args: vec!["--system".into(), "ode27".into(), "--draws".into(), "5".into(), "--noise".into(), "0.01".into(), "--seed".into(), "3".into()],
            extra: &[],
        },
        Stage {
            command: "bench",
            out_flag: "--out",
            out: "bench.csv",
            args: vec!["--systems".into(), "ode2,ode27,ode56".into(), "--draws".into(), "4".into(), "--noise".into(), "0.01".into(), "--seed".into(), "1".into()],
            extra: &["bench.md"],
        },
        Stage {
            command: "bench",
            out_flag: "--out",
            out: "bench_traj.csv",
            args: vec!["--systems".into(), "ode56".into(), "--draws".into(), "2".into(), "--method".into(), "traj".into(), "--t-max".into(), "2".into(), "--points".into(), "100".into()],
            extra: &["bench_traj.md"],
        },
        Stage {
            command: "synth-mv",
            out_flag: "--out",
            out: "pairs.json",
            args: vec!["--system".into(), "ode27".into(), "--shared".into(), "0,1".into(), "--pairs".into(), "300".into(), "--seed".into(), "5".into()],
            extra: &[],
        },
        Stage {
            command: "train-mv",
            out_flag: "--out",
            out: "model.json",
            args: vec!["--config".into(), train_cfg.display().to_string(), "--data".into(), p("pairs.json"), "--epochs".into(), "4".into(), "--seed".into(), "2".into()],
            extra: &["model.loss.csv"],
        },
        Stage {
            command: "eval",
            out_flag: "--report",
            out: "eval.csv",
            args: vec!["--model".into(), p("model.json"), "--data".into(), p("pairs.json"), "--seed".into(), "4".into()],
            extra: &["eval.md"],
        },
        Stage {
            command: "report",
            out_flag: "--out",
            out: "report.md",
            args: vec!["--inputs".into(), format!("{},{}", p("bench.csv"), p("bench_traj.csv"))],
            extra: &[],
        },
    ]
}

fn replay_name(name: &str) -> String {
    format!("replay_{name}")
}

fn compare(a: &Path, b: &Path) -> Result<(), String> {
    let x = fs::read(a).map_err(|e| format!("{}: {e}", a.display()))?;
    let y = fs::read(b).map_err(|e| format!("{}: {e}", b.display()))?;
    if x == y {
        Ok(())
    } else {
        Err(format!("{} and {} differ", a.display(), b.display()))
    }
}

fn pipeline(dir: &Path) -> Result<usize, String> {
    let mut compared = 0;
    for s in stages(dir) {
        let out: PathBuf = dir.join(s.out);
        let mut args = vec![s.command.to_string()];
        args.extend(s.args.iter().cloned());
        args.push(s.out_flag.into());
        args.push(out.display().to_string());
        dynident(&args.iter().map(String::as_str).collect::<Vec<_>>())?;

        let manifest = manifest_path(&out);
        RunManifest::read(&manifest).and_then(|m| m.verify_outputs()).map_err(|e| e.to_string())?;
        let replay = dir.join(replay_name(s.out));
        dynident(&[
            "--config",
            &manifest.display().to_string(),
            s.command,
            s.out_flag,
            &replay.display().to_string(),
        ])?;
        compare(&out, &replay)?;
        for e in s.extra {
            compare(&dir.join(e), &dir.join(replay_name(e)))?;
        }
        compared += 1 + s.extra.len();
    }
    Ok(compared)
}

pub fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    match pipeline(dir.path()) {
        Ok(n) => Outcome::check(true, format!("{n} outputs over 7 runs byte-identical on manifest replay")),
        Err(e) => Outcome::check(false, e),
    }
}
