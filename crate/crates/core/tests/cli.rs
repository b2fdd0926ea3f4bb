use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bsde-lab"));
    c.env_remove("BSDE_LAB_OUT");
    c
}

fn golden(kind: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{kind}.config.json"))
}

fn run_kind(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(kind)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_kind("young-sweep", &golden("young-sweep"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("young-sweep.csv")).unwrap();
    assert!(csv.starts_with("lambda_lo,lambda_hi,triples,"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("young-sweep.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["seed"], 11);
    assert_eq!(json["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn format_flag_limits_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_kind("integrability", &golden("integrability"), dir.path(), &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("integrability.json").exists());
    assert!(!dir.path().join("integrability.csv").exists());
}

#[test]
fn insufficient_exponent_is_rejected_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"gamma": 1.0, "lambda": 2.0, "samples": 1000000}"#);
    let start = Instant::now();
    let out = run_kind("bound", &config, dir.path(), &[]);
    assert!(start.elapsed() < Duration::from_secs(1));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sufficiency"));
    assert!(!dir.path().join("bound.csv").exists());
}

#[test]
fn bad_configurations_are_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    for body in [r#"{"gama": 0.5}"#, r#"{"kind": "solve"}"#, "not json", r#"{"steps": 0}"#] {
        let config = write_config(dir.path(), body);
        let out = run_kind("ladder", &config, dir.path(), &[]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let out = bin().arg("no-such-kind").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_kind("solve", &dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn violated_property_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"steps": 10, "samples": 5000, "terminal": {"kind": "clamp", "lo": -2.0, "hi": 2.0}, "oracle_rel_tol": 1e-9}"#,
    );
    let out = run_kind("solve", &config, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL oracle agreement"));
    // The table is still written.
    assert!(dir.path().join("solve.csv").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_kind("phi-moment", &golden("phi-moment"), &a, &["--format", "csv"]);
    run_kind("phi-moment", &golden("phi-moment"), &b, &["--format", "csv", "--seed", "99"]);
    let csv_a = fs::read(a.join("phi-moment.csv")).unwrap();
    let csv_b = fs::read(b.join("phi-moment.csv")).unwrap();
    assert_ne!(csv_a, csv_b);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["young-sweep", "--format", "csv", "--config"])
        .arg(golden("young-sweep"))
        .env("BSDE_LAB_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("young-sweep.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["young-sweep", "integrability", "solve", "bound"] {
        let a = dir.path().join(format!("{kind}-a"));
        let b = dir.path().join(format!("{kind}-b"));
        run_kind(kind, &golden(kind), &a, &[]);
        run_kind(kind, &golden(kind), &b, &[]);
        let file = format!("{kind}.csv");
        assert_eq!(fs::read(a.join(&file)).unwrap(), fs::read(b.join(&file)).unwrap(), "{kind}");
    }
}
