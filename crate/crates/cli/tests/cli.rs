use std::path::{Path, PathBuf};
use std::process::Command;

use specpart_cli::report::RunReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specpart"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SQUARE: &str = r#"
[domain]
kind = "grid"
lower = [0.0, 0.0]
upper = [1.0, 1.0]

[grid]
resolution = 64

[optimization]
cells = 2
seed = 1
max_iter = 40
"#;

#[test]
fn minimal_run_exits_cleanly_with_monotone_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SQUARE);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = RunReport::load(&out.join("report.json")).unwrap();
    assert_eq!(report.cells, 2);
    assert_eq!(report.degrees_of_freedom, 2 * 64 * 64);
    assert!(report.history.windows(2).all(|w| w[1].energy <= w[0].energy));
    let csv = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), report.history.len() + 1);
    for f in ["checkpoint.bin", "config.toml", "classification.json", "export/labels.csv", "export/boundaries.csv", "export/stiffness.mtx"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn zero_cells_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SQUARE.replace("cells = 2", "cells = 0"));
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("optimization.cells"));
}

#[test]
fn malformed_inputs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[domain]\nkind = 3\n");
    assert_eq!(bin().args(["run", cfg.to_str().unwrap()]).status().unwrap().code(), Some(2));
    let junk = tmp.path().join("junk.bin");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(bin().args(["resume", junk.to_str().unwrap()]).status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["export", tmp.path().to_str().unwrap()]).status().unwrap().code(), Some(2));
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SQUARE.replace("resolution = 64", "resolution = 16"));
    let out = tmp.path().join("o");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--seed", "9", "--max-iter", "3", "--output", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = RunReport::load(&out.join("report.json")).unwrap();
    assert_eq!(report.config.optimization.seed, 9);
    assert_eq!(report.config.optimization.max_iter, 3);
    assert!(report.iterations <= 3);
}

#[test]
fn effective_config_reproduces_the_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SQUARE.replace("resolution = 64", "resolution = 24"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    bin().args(["run", cfg.to_str().unwrap(), "--output", a.to_str().unwrap()]).status().unwrap();
    let effective = a.join("config.toml");
    let status = bin()
        .args(["run", effective.to_str().unwrap(), "--output", b.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let ra = RunReport::load(&a.join("report.json")).unwrap();
    let rb = RunReport::load(&b.join("report.json")).unwrap();
    assert_eq!(ra.history, rb.history);
}

#[cfg(unix)]
#[test]
fn sigint_writes_checkpoint_and_resume_matches() {
    use std::time::{Duration, Instant};

    let tmp = tempfile::tempdir().unwrap();
    let body = SQUARE.replace("max_iter = 40", "max_iter = 60")
        + "\n[output]\ncheckpoint_interval = 1\nclassify = false\nexport = false\n";
    let cfg = write_config(tmp.path(), &body);
    let full = tmp.path().join("full");
    let part = tmp.path().join("part");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--output", full.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let mut child = bin()
        .args(["run", cfg.to_str().unwrap(), "--output", part.to_str().unwrap()])
        .spawn()
        .unwrap();
    let ckpt = part.join("checkpoint.bin");
    let t = Instant::now();
    while !ckpt.exists() && t.elapsed() < Duration::from_secs(60) {
        std::thread::sleep(Duration::from_millis(5));
    }
    Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    let code = child.wait().unwrap().code();
    if code == Some(0) {
        // The run finished before the signal arrived; nothing to resume.
        return;
    }
    assert_eq!(code, Some(4));
    let status = bin().args(["resume", ckpt.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let a = RunReport::load(&full.join("report.json")).unwrap();
    let b = RunReport::load(&part.join("report.json")).unwrap();
    assert!((a.energy - b.energy).abs() <= 1e-10);
    assert_eq!(a.history, b.history);
}

#[test]
fn surface_run_exports_labelled_ply() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
[domain]
kind = "sphere"
subdivisions = 2

[optimization]
cells = 3
seed = 2
max_iter = 10
"#;
    let cfg = write_config(tmp.path(), body);
    let out = tmp.path().join("s");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let ply = std::fs::read_to_string(out.join("export/labels.ply")).unwrap();
    assert!(ply.contains("property int label"));
    assert!(out.join("export/mass.mtx").is_file());
}

#[test]
fn three_dimensional_run_classifies_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
[domain]
kind = "grid"
lower = [0.0, 0.0, 0.0]
upper = [1.0, 1.0, 1.0]

[grid]
resolution = 12

[optimization]
cells = 2
seed = 5
max_iter = 80
"#;
    let cfg = write_config(tmp.path(), body);
    let out = tmp.path().join("v");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("classification.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["spectral"]["cells"].as_array().unwrap().len(), 2);
    assert!(v["spectral"]["class_count"].as_u64().unwrap() >= 1);
    assert!(out.join("cells/cell_0000.obj").is_file());
    let status = bin().args(["classify", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
}
