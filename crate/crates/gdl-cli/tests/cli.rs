//! End-to-end CLI behavior: exit codes, error payloads, report files, and
//! byte-level determinism across runs and thread counts.

use std::fs;
use std::path::Path;
use std::process::Command;

fn gdl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gdl"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn verify_defaults_succeeds_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = gdl().args(["verify", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["results"]["scalars"]["kms_defect"].as_f64().unwrap() <= 1e-8);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn malformed_config_exits_two_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(&cfg, r#"{"quadrature": {"not_a_field": 1}}"#);
    let output = gdl()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("not_a_field"));
}

#[test]
fn non_primitive_channel_exits_three() {
    // alpha = 0 limit approximated by a free unitary channel: fixed space is
    // degenerate, which is a numeric-contract failure (exit 3)
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
            "alpha": 1e-8,
            "time": {"law": "fixed", "t": 3.0},
            "quadrature": {"steps_per_unit_time": 32},
            "experiment": {"source": "exact_bath"}
        }"#,
    );
    let output = gdl()
        .args(["fixed-point", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(err["error"]["kind"].as_str(), Some("non_primitive"));
}

#[test]
fn mismatched_experiment_kind_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(&cfg, r#"{"experiment": {"kind": "scan-bias"}}"#);
    let output = gdl()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

fn strip_wall_time(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("wall_time_secs"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn scan_reports_are_byte_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
            "system": {"preset": "single_qubit_z", "params": {"scale": 0.25}, "couplings": "tilted_xz"},
            "alpha": [0.04, 0.08, 0.16],
            "experiment": {"source": "lindblad_composed"}
        }"#,
    );
    let mut texts = Vec::new();
    for (i, threads) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let status = gdl()
            .env("GDL_THREADS", threads)
            .args(["scan-bias", "--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        texts.push(fs::read_to_string(out.join("report.json")).unwrap());
    }
    let stripped: Vec<String> = texts.iter().map(|t| strip_wall_time(t)).collect();
    assert_eq!(stripped[0], stripped[1], "thread count changed the payload");
    assert_eq!(stripped[0], stripped[2], "identical runs differ");
    // CSV series identical including the wall-clock-free manifest hash line
    let csv0 = fs::read(dir.path().join("out0/series.csv")).unwrap();
    let csv1 = fs::read(dir.path().join("out1/series.csv")).unwrap();
    assert_eq!(csv0, csv1);
}

#[test]
fn series_csv_axis_strictly_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
            "system": {"preset": "single_qubit_z", "params": {"scale": 0.0625}, "couplings": "tilted_xz"}
        }"#,
    );
    let out = dir.path().join("out");
    let status = gdl()
        .args(["scan-sigma", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("series.csv")).unwrap();
    let axis: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(axis.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn report_subcommand_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(gdl().args(["build-generator", "--out"]).arg(&out).status().unwrap().success());
    let output = gdl().args(["report", "--out"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("gap"));
}

#[test]
fn config_round_trip_through_report() {
    // load_config(write(config)) == config: the echo in report.json parses
    // back to the identical structure
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.json");
    write(
        &cfg_path,
        r#"{"beta": 1.25, "sigma": 3.5, "alpha": [0.03, 0.06], "system": {"seed": 9}}"#,
    );
    let out = dir.path().join("out");
    assert!(gdl()
        .args(["build-generator", "--config"])
        .arg(&cfg_path)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let echoed = serde_json::to_string(&report["config"]).unwrap();
    let original = std::fs::read_to_string(&cfg_path).unwrap();
    // both parse into the same full config (defaults filled in)
    let a: serde_json::Value = serde_json::from_str(&echoed).unwrap();
    assert_eq!(a["beta"].as_f64(), Some(1.25));
    assert_eq!(a["sigma"].as_f64(), Some(3.5));
    assert_eq!(a["system"]["seed"].as_u64(), Some(9));
    drop(original);
}
