use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn htype(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_htype"));
    cmd.args(args).env_remove("HTYPE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_KERNEL: &str = r#"{
    "kernel": {"kind": "schrodinger", "n_x": 3, "L_x": 1.0, "n_z": 3, "L_z": 1.0, "n_t": 5, "T": 2.0},
    "spectral": {"K_max": 6}
}"#;

const SMALL_SCAN: &str = r#"{
    "grid": {"n_x": 16, "L_x": 5.0, "n_z": 32, "L_z": 8.0, "n_t": 6, "T": 1.0},
    "spectral": {"N_max": 8, "radial_nodes": 16, "lambda_max": 5.0}
}"#;

#[test]
fn unknown_command_is_a_usage_error() {
    let o = htype(&["frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_config_reports_json_pointer() {
    let dir = TempDir::new().unwrap();
    for (json, pointer) in [
        (r#"{"grid": {"n_x": 0}}"#, "/grid/n_x"),
        (r#"{"grid": {"n_x": "many"}}"#, "/grid/n_x"),
        (r#"{"psi": {"a": 2.0, "b": 1.0}}"#, "/psi/b"),
        (r#"{"strichartz_scan": {"dilations": [1.0, -2.0]}}"#, "/strichartz_scan/dilations/1"),
    ] {
        let cfg = write_config(dir.path(), json);
        let out = dir.path().join("out");
        let o = htype(&["kernel", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(2), "{json}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(pointer), "{json}: {err}");
    }
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = htype(&["projector-norms", "--out", dir.path().to_str().unwrap()], &[("HTYPE_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kernel_output_is_thread_count_independent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_KERNEL);
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = htype(&["kernel", "--config", &cfg, "--out", out.to_str().unwrap()], &[("HTYPE_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(out.join("kernel.csv")).unwrap();
        assert!(csv.starts_with("t,x,z,re,im\n"));
        csvs.push(csv);
        let m = read_json(&out.join("manifest.json"));
        assert_eq!(m["status"], "pass");
        assert_eq!(m["threads"], threads.parse::<u64>().unwrap());
        assert!(m["tolerances"]["kernel.sup_over_bound"].is_number());
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].lines().count(), 1 + 5 * 9 * 3);
}

#[test]
fn projector_norms_writes_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"projector_norms": {"p": 2, "r": "inf", "k_min": 0, "k_max": 3}}"#);
    let out = dir.path().join("out");
    let o = htype(&["projector-norms", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("projector_norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,norm,bound,ratio"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        // The L^2 -> L^inf norm is attained, so the ratio is level independent.
        assert!((r[3] - rows[0][3]).abs() < 1e-9, "{rows:?}");
    }
    let report = read_json(&out.join("projector_norms.json"));
    assert_eq!(report["r"], "inf");
}

#[test]
fn strichartz_scan_flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SCAN);
    let out = dir.path().join("out");
    let args = ["strichartz-scan", "--config", &cfg, "--out", out.to_str().unwrap(), "--p", "4", "--q", "4", "--r", "inf", "--dilations", "1,2"];
    let o = htype(&args, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("strichartz_scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scale,mixed,l2,h_sigma,ratio"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    let ratio: Vec<f64> = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!((ratio[0] - ratio[1]).abs() < 1e-9 * ratio[0]);
    // Twelve significant digits.
    let mixed = rows[0].split(',').nth(1).unwrap();
    let significant = mixed.trim_start_matches(['0', '.']).chars().filter(char::is_ascii_digit).count();
    assert_eq!(significant, 12, "{mixed}");
    let report = read_json(&out.join("strichartz_scan.json"));
    assert_eq!(report["exploratory"], false);
    assert_eq!(report["r"], "inf");
}

#[test]
fn inadmissible_scan_needs_explore() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SCAN);
    let out = dir.path().join("out");
    let base = ["strichartz-scan", "--config", &cfg, "--out", out.to_str().unwrap(), "--p", "2", "--q", "4", "--dilations", "1,2"];
    let o = htype(&base, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--explore"));
    let mut explore = base.to_vec();
    explore.push("--explore");
    let o = htype(&explore, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("strichartz_scan.json"))["exploratory"], true);
}

#[test]
fn verify_passes_on_defaults() {
    let dir = TempDir::new().unwrap();
    let o = htype(&["verify", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&dir.path().join("report.json"));
    let checks = report["invariants"].as_array().unwrap();
    assert!(checks.len() >= 20);
    assert!(checks.iter().all(|c| c["passed"] == true));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "verify");
    assert_eq!(m["tolerances"].as_object().unwrap().len(), checks.len());
}
