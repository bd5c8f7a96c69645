use std::path::Path;
use std::process::{Command, Output};

fn salem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"{"schema_version": 1, "pattern": {"kind": "ap3"},
  "construction": {"M": 128, "lambda": 0.25, "seed": 3}, "trials": 2}"#;

#[test]
fn build_then_check_sweep_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("b");
    let o = salem(&["build", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let points = out.join("points.csv");
    assert!(points.exists() && out.join("points.json").exists());
    let p = points.to_str().unwrap();

    assert_eq!(code(&salem(&["check", "--config", &cfg, "--points", p])), 0);
    // at a margin of half the torus every separated triple counts
    assert_eq!(code(&salem(&["check", "--config", &cfg, "--points", p, "--margin", "0.5"])), 1);

    let sw = dir.path().join("sw");
    let o = salem(&["sweep", "--config", &cfg, "--points", p, "--out", sw.to_str().unwrap()]);
    assert!(matches!(code(&o), 0 | 1));
    assert!(sw.join("sweep.json").exists() && sw.join("sweep.csv").exists());

    let o = salem(&["estimate-dim", "--config", &cfg, "--points", p]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["fourier"].as_f64().is_some());
}

#[test]
fn montecarlo_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("mc{k}"));
        let o = salem(&["--threads", "1", "montecarlo", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("report.json").exists());
        csvs.push(std::fs::read(out.join("trials.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&salem(&["build", "--config", missing.to_str().unwrap()])), 2);
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "pattern": {"kind": "ap3"}, "bogus": 1}"#);
    assert_eq!(code(&salem(&["build", "--config", &cfg])), 2);
    let cfg = write_config(dir.path(), r#"{"schema_version": 9, "pattern": {"kind": "ap3"}}"#);
    assert_eq!(code(&salem(&["montecarlo", "--config", &cfg])), 2);
}

#[test]
fn failed_construction_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // at lambda near 1 the radius is too large for the 3-AP pattern to be avoided
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "pattern": {"kind": "ap3"}, "construction": {"M": 256, "lambda": 0.95}}"#,
    );
    assert_eq!(code(&salem(&["build", "--config", &cfg])), 1);
}

#[test]
fn linear_equation_demo_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("demo");
    let o = salem(&[
        "demo",
        "linear-eq",
        "--config",
        &cfg,
        "--trials",
        "1",
        "--coeff-bound",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(out.join("demo.json").exists());
}
