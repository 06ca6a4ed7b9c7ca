use std::path::Path;
use std::process::{Command, Output};

fn plate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn constants_for_the_unit_disk_volume() {
    let out = plate(&["constants", "--dim", "2", "--omega0", "3.141592653589793"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    // eps1 = (ω₀/ω₂) ω₀ / j₁,₁² with ω₀ = ω₂ = π
    let j11 = 3.831705970207512_f64;
    let eps1 = v["eps1"].as_f64().unwrap();
    assert!((eps1 - std::f64::consts::PI / (j11 * j11)).abs() < 1e-12);
    assert!((eps1 - 0.21398).abs() < 1e-5);
    for key in ["omega_n", "lambda_ball_unit", "c_n", "eps0", "alpha0"] {
        assert!(v[key].is_f64(), "{key}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(plate(&["bogus"]).status.code(), Some(1));
    assert_eq!(plate(&[]).status.code(), Some(1));
    assert_eq!(
        plate(&["constants", "--dim", "two", "--omega0", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(plate(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dim": 2, "omega0": 9.5, "container": {"box": 3.0}}"#,
    );
    let out = plate(&["optimize", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega0"));
}

#[test]
fn solve_on_generated_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dim": 2, "omega0": 3.141592653589793, "container": {"box": 3.0}, "cells_per_side": 48, "output_dir": "solve"}"#,
    );
    let out = plate(&["solve", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let lambda = v["lambda"].as_f64().unwrap();
    assert!(lambda > 11.0 && lambda < 14.7, "{lambda}");
    assert!(dir.path().join("solve/field.csv").exists());
    assert!(dir.path().join("solve/support.pgm").exists());

    let out = plate(&[
        "solve", "--config", &cfg, "--shape", "annulus", "--inner", "0.3", "--outer", "1.0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = plate(&["solve", "--config", &cfg, "--shape", "rectangle"]);
    assert_eq!(out.status.code(), Some(1));
    let out = plate(&[
        "solve", "--config", &cfg, "--shape", "ball", "--radius", "2.0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dim": 2, "omega0": 3.141592653589793, "container": {"box": 3.0}, "cells_per_side": 40,
            "output_dir": "run", "diagnostics": {"monotonicity_pairs": 2}}"#,
    );
    let out = plate(&["optimize", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["certificate"]["verdict"], "pass");
    let run = dir.path().join("run");
    for f in [
        "history.csv",
        "result.json",
        "support.pgm",
        "abs_u.pgm",
        "field.csv",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("iter,I,lambda,volume,moved_cells\n"));

    let result = run.join("result.json");
    let out = plate(&["diagnose", "--input", result.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let d = json(&out);
    let stored = d["stored"]["lambda"].as_f64().unwrap();
    let again = d["recomputed"]["lambda"].as_f64().unwrap();
    assert!((stored - again).abs() <= 1e-7 * stored);
    assert_eq!(d["diagnostics"]["connectedness"]["pass"], true);
}

#[test]
fn identical_runs_have_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"dim": 2, "omega0": 3.141592653589793, "container": {"box": 3.0}, "cells_per_side": 32,
                  "penalty": "rewarding", "eps": {"fraction_of": "eps0", "factor": 0.9},
                  "diagnostics": {"enabled": false}}"#;
    let cfg = write_config(dir.path(), body);
    let mut payloads = Vec::new();
    for (threads, out_dir) in [("1", "a"), ("4", "b")] {
        let status = Command::new(env!("CARGO_BIN_EXE_plate"))
            .args(["optimize", "--config", &cfg, "--output"])
            .arg(dir.path().join(out_dir))
            .env("PLATE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(
            status.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        let text = std::fs::read_to_string(dir.path().join(out_dir).join("result.json")).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut payload = doc["payload"].clone();
        // the echoed output directory is the only intended difference
        payload["config"]["output_dir"] = serde_json::Value::Null;
        payloads.push(payload);
    }
    assert_eq!(payloads[0], payloads[1]);
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_plate"))
        .args(["constants", "--dim", "2", "--omega0", "1"])
        .env("PLATE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
