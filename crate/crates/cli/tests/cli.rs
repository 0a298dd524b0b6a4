use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nlskdv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlskdv"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NLSKDV_OUT")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn stabilize_reports_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(&["stabilize", "--set", "n=32", "--out", "st"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("st"));
    assert!(r["results"]["gamma"].as_f64().unwrap() > 0.0);
    assert_eq!(r["results"]["energy_monotone"], Value::Bool(true));
    assert_eq!(r["config"]["n"], 32);
    assert_eq!(r["command"], "stabilize");
    assert!(tmp.path().join("st/trajectory.csv").exists());
    assert!(tmp.path().join("st/meta.json").exists());
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(
        &["simulate", "--set", "initial.kind=\"zero\"", "--set", "t=0.5", "--set", "n=16", "--out", "z"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("z/trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let energy: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(energy, 0.0);
    }
}

#[test]
fn invalid_dt_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "n = 16\ndt = -1.0\n").unwrap();
    let out = nlskdv(&["simulate", "--config", "bad.toml", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn parse_errors_are_line_numbered() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("broken.toml"), "n = 16\n[params\n").unwrap();
    let out = nlskdv(&["simulate", "--config", "broken.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn json_config_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"n": 16, "t": 0.5, "seed": 9, "simulate": {"mode": "open-loop"}}"#,
    )
    .unwrap();
    for dir in ["a", "b"] {
        let out = nlskdv(&["simulate", "--config", "c.json", "--out", dir], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(tmp.path().join("a/report.json")).unwrap();
    let b = fs::read(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    let r = report(&tmp.path().join("a"));
    assert_eq!(r["results"]["mode"], "open-loop");
}

#[test]
fn local_control_rejects_large_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(
        &["control", "--set", "n=16", "--set", "control.kind=\"local\"", "--out", "c"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("c").exists());
}

#[test]
fn linear_control_writes_controls() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(
        &["control", "--set", "n=16", "--set", "control.horizon=1.0", "--out", "c"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("c"));
    assert!(r["results"]["terminal_residual"].as_f64().unwrap() < 1e-8);
    let csv = fs::read_to_string(tmp.path().join("c/controls.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,f_l2,h_l2");
    assert_eq!(csv.lines().count(), 1 + 1001);
}

#[test]
fn diagnose_symbol_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(
        &[
            "diagnose",
            "--set",
            "diagnose.estimates=false",
            "--set",
            "diagnose.nmax=16",
            "--out",
            "d",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&tmp.path().join("d"));
    assert!(r["results"]["symbol"]["sup"].as_f64().unwrap().is_finite());
    assert!(!tmp.path().join("d/ratios.csv").exists());
}

#[test]
fn sweep_rows_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(
        &[
            "sweep", "--command", "simulate", "--set", "n=16", "--set", "t=0.2", "--axis", "dt", "--values",
            "1e-2,-1,5e-3", "--out", "sw",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("index,value,status,"));
    assert!(lines[1].starts_with("0,1e-2,ok"));
    assert!(lines[2].starts_with("1,-1,error:validation"));
    assert!(tmp.path().join("sw/run-002/report.json").exists());
}

#[test]
fn empty_sweep_is_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nlskdv(
        &["sweep", "--command", "simulate", "--axis", "dt", "--values=", "--out", "e"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(tmp.path().join("e/sweep.csv")).unwrap(), "index,value,status\n");
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nlskdv"))
        .args(["simulate", "--set", "n=16", "--set", "t=0.1"])
        .current_dir(tmp.path())
        .env("NLSKDV_OUT", "runs")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("runs/simulate/report.json").exists());
}
