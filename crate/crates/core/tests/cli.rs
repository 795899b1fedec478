use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use dynident::cli::manifest::RunManifest;

fn dynident(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynident")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn systems_list_is_tab_separated() {
    let out = dynident(&["systems", "list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "id\tname\td\tN\tlinear_in_theta");
    assert!(lines.any(|l| l.starts_with("ode56\t")));
}

#[test]
fn validation_errors_exit_with_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynident(&["bench", "--systems", "ode2", "--draws", "-1", "--out", s(&dir.path().join("b.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_line(&out);
    assert_eq!(e["error"], "config");
    assert_eq!(e["key"], "draws");
    assert!(!dir.path().join("b.csv").exists());

    assert_eq!(dynident(&["frobnicate"]).status.code(), Some(1));
    let out = dynident(&["simulate", "--system", "ode999", "--out", s(&dir.path().join("s.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["key"], "system");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"schema_version": 1, "systems": ["ode2"], "drawz": 3}"#).unwrap();
    let out = dynident(&["--config", s(&cfg), "bench", "--out", s(&dir.path().join("b.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"schema_version": 1, "systems": ["ode2"], "draws": 7, "seed": 4}"#).unwrap();
    let out_path = dir.path().join("b.csv");
    let out = dynident(&["--config", s(&cfg), "bench", "--draws", "3", "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::read(&dir.path().join("b.csv.manifest.json")).unwrap();
    assert_eq!(m.config["draws"], 3);
    assert_eq!(m.config["seed"], 4);
    m.verify_outputs().unwrap();
    let csv = fs::read_to_string(&out_path).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("ode2,3,"), "{csv}");
}

#[test]
fn outputs_are_write_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    let args = ["simulate", "--system", "ode2", "--out", s(&out)];
    assert!(dynident(&args).status.success());
    let before = fs::read(&out).unwrap();
    let again = dynident(&args);
    assert_eq!(again.status.code(), Some(1));
    assert_eq!(error_line(&again)["error"], "invalid_argument");
    assert_eq!(fs::read(&out).unwrap(), before);
    let mut forced = vec!["--force"];
    forced.extend(args);
    assert!(dynident(&forced).status.success());
}

#[test]
fn zero_threads_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_dynident"))
        .args(["systems", "list"])
        .env("DYNIDENT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["key"], "threads");
}

#[test]
fn synth_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f);
    let run = |args: &[&str]| {
        let out = dynident(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["synth-mv", "--system", "ode27", "--shared", "0,1", "--pairs", "120", "--seed", "1", "--out", s(&p("d.json"))]);
    fs::write(p("t.json"), r#"{"hidden_dim": 16, "depth": 2, "batch": 16}"#).unwrap();
    run(&["--config", s(&p("t.json")), "train-mv", "--data", s(&p("d.json")), "--epochs", "5", "--out", s(&p("m.json"))]);
    let curve = fs::read_to_string(p("m.loss.csv")).unwrap();
    assert_eq!(curve.lines().count(), 6);
    run(&["eval", "--model", s(&p("m.json")), "--data", s(&p("d.json")), "--report", s(&p("e.csv"))]);
    let report = fs::read_to_string(p("e.csv")).unwrap();
    assert!(report.starts_with("section,row,column,value\n"));
    for section in ["accuracy,", "r2,", "block_distance,", "ate,"] {
        assert!(report.lines().any(|l| l.starts_with(section)), "{section} missing");
    }
    assert!(fs::read_to_string(p("e.md")).unwrap().contains("AIPW"));
    for m in ["d.json", "m.json", "e.csv"] {
        RunManifest::read(&p(&format!("{m}.manifest.json"))).unwrap().verify_outputs().unwrap();
    }
}

#[test]
fn report_converts_bench_csv_to_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f);
    assert!(dynident(&["bench", "--systems", "ode2,ode6", "--draws", "2", "--out", s(&p("b.csv"))]).status.success());
    assert!(dynident(&["report", "--inputs", s(&p("b.csv")), "--out", s(&p("r.md"))]).status.success());
    assert_eq!(fs::read(p("r.md")).unwrap(), fs::read(p("b.md")).unwrap());
}
