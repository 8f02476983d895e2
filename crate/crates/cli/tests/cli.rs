use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fcd_cli::commands::cmd_features;
use fcd_cli::config::RunConfig;
use fcd_cli::ingest::{ingest_csv, write_signal_csv};
use fcd_cli::synthetic::{noisy_sine, trend};
use fcd_core::signal::Signal;
use serde_json::Value;

fn fcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcd")).args(args).output().unwrap()
}

fn write_input(dir: &Path, name: &str, signal: &Signal) -> PathBuf {
    let path = dir.join(name);
    write_signal_csv(&path, signal).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

/// Columns of a series table, skipping the schema comment and header.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn polynomial(n: usize, f: impl Fn(f64) -> f64) -> Signal {
    let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
    let y = x.iter().map(|&v| f(v)).collect();
    Signal::new(x, y).unwrap()
}

#[test]
fn written_signals_read_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let s = trend(300, 4);
    let path = write_input(dir.path(), "s.csv", &s);
    let (back, report) = ingest_csv(&path, Some("x"), Some("y")).unwrap();
    assert_eq!(back, s);
    assert_eq!((report.rows, report.dropped, report.collapsed), (300, 0, 0));
}

#[test]
fn decompose_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(1000, 3));
    let out = dir.path().join("out");
    let run = fcd(&[
        "decompose",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--integral",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for name in [
        "fitted.csv",
        "segments.csv",
        "report.txt",
        "decomposition.json",
        "metrics.json",
        "integral.csv",
        "integral.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["mode_count"], 7);
    assert_eq!(m["model"], "cubic");
    let overall = m["overall_mean_srmse"].as_f64().unwrap();
    assert!(overall > 0.0 && overall <= 1.0, "{overall}");
    let (header, rows) = table(&out.join("fitted.csv"));
    assert_eq!(header.len(), 8);
    assert_eq!(rows.len(), 1000);
}

#[test]
fn metrics_prints_the_overall_mean() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(400, 5));
    let run = fcd(&[
        "metrics",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--model",
        "sin6",
    ]);
    assert!(run.status.success());
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("model sin6, 400 points, 6 modes"), "{stdout}");
    assert!(stdout.contains("overall mean SRMSE 0."), "{stdout}");
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(100, 1));
    let run = fcd(&["decompose", "--input", input.to_str().unwrap(), "--model", "sin9"]);
    assert_eq!(run.status.code(), Some(2));
    let report = stderr_report(&run);
    assert_eq!(report["error"], "UnknownModel");
    assert_eq!(report["exit_code"], 2);
    assert!(report["message"].as_str().unwrap().contains("sin9"));
}

#[test]
fn missing_input_is_a_config_error() {
    let run = fcd(&["decompose"]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(stderr_report(&run)["module"], "cli-io");
}

#[test]
fn unreadable_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x,y\n0,1\n1,abc\n").unwrap();
    let run = fcd(&["decompose", "--input", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    assert_eq!(stderr_report(&run)["error"], "NonNumericCell");
}

#[test]
fn absolute_reports_write_the_shift_into_each_case() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(100, 2));
    let out = dir.path().join("out");
    let run = fcd(&[
        "decompose",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--report",
        "absolute",
    ]);
    assert!(run.status.success());
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.starts_with("# fcd/1 piecewise report (absolute)"), "{text}");
    assert!(text.contains("(x - 4)^3"), "{text}");
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(200, 6));
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"quadratic\"\nalpha_seg = 4\n").unwrap();
    let out = dir.path().join("out");
    let run = fcd(&[
        "metrics",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--model",
        "cubic",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["model"], "quadratic");
    assert_eq!(m["segment_counts"][0], 50);
}

#[test]
fn derive_writes_each_requested_order() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (0.2, -1.1);
    let s = polynomial(200, |t| ((a * t + b) * t + 0.5) * t + 3.0);
    let input = write_input(dir.path(), "s.csv", &s);
    let out = dir.path().join("out");
    let run = fcd(&[
        "derive",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--order",
        "1",
        "--order",
        "2",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("derivative_1.csv").is_file());
    let (header, rows) = table(&out.join("derivative_2.csv"));
    let trend = header.len() - 1;
    for row in rows {
        let oracle = 6.0 * a * row[0] + 2.0 * b;
        assert!((row[trend] - oracle).abs() <= 1e-6, "{}: {} vs {oracle}", row[0], row[trend]);
    }
    let doc = json(&out.join("derivative_2.json"));
    assert_eq!(doc["kind"], "derivative");
    assert_eq!(doc["modes"][0]["method"], "analytic");
}

#[test]
fn integrate_is_continuous_and_starts_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = noisy_sine(300, 8);
    let input = write_input(dir.path(), "s.csv", &s);
    let out = dir.path().join("out");
    let run = fcd(&[
        "integrate",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let (_, rows) = table(&out.join("integral.csv"));
    let step_bound = 2.0 * s.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(rows[0][1..].iter().all(|&v| v == 0.0));
    for pair in rows.windows(2) {
        let dx = pair[1][0] - pair[0][0];
        for c in 1..pair[0].len() {
            // consecutive samples differ by at most the integrand bound times dx
            assert!((pair[1][c] - pair[0][c]).abs() <= step_bound * dx);
        }
    }
    let doc = json(&out.join("integral.json"));
    assert!(doc["modes"][0]["segments"][1]["constant"].is_number());
}

#[test]
fn feature_windows_leave_room_for_the_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(5000, 9));
    let cfg = RunConfig {
        input: Some(input),
        out_dir: dir.path().join("out"),
        ..Default::default()
    };
    let outcome = cmd_features(&cfg).unwrap();
    assert!(outcome.stdout.starts_with("983 windows"), "{}", outcome.stdout);
    let layout = json(&cfg.out_dir.join("features.layout.json"));
    assert_eq!(layout["n_windows"], 983);
    assert_eq!(layout["starts"][982], 4910);
    let text = std::fs::read_to_string(cfg.out_dir.join("features.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 983);
    let row_len = layout["row_len"].as_u64().unwrap() as usize;
    assert!(rows.iter().all(|r| r.split(',').count() == row_len));
}

#[test]
fn stride_equal_to_window_tiles_the_signal() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(1020, 10));
    let out = dir.path().join("out");
    let run = fcd(&[
        "features",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--window",
        "50",
        "--stride",
        "50",
        "--horizon",
        "0",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let layout = json(&out.join("features.layout.json"));
    assert_eq!(layout["n_windows"], 20);
    assert_eq!(layout["starts"][19], 950);
}

#[test]
fn window_longer_than_the_signal_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &noisy_sine(59, 11));
    let run = fcd(&[
        "features",
        "--input",
        input.to_str().unwrap(),
        "--window",
        "60",
        "--horizon",
        "0",
    ]);
    assert_eq!(run.status.code(), Some(3));
    assert_eq!(stderr_report(&run)["error"], "WindowTooLong");
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "s.csv", &trend(500, 12));
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = fcd(&[
            "decompose",
            "--input",
            input.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--model",
            "sin6",
        ]);
        assert!(status.status.success());
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bench_prints_one_table_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let run = fcd(&[
        "bench",
        "--sizes",
        "10,100",
        "--models",
        "linear",
        "--repeats",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("model linear"), "{stdout}");
    let rows = json(&dir.path().join("bench.json"));
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[1]["modes"], 4);
}
