//! End-to-end tests of the `sgmm` binary: subcommands, exit codes, output
//! formats, and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgmm"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn sgmm");
    assert!(
        out.status.success(),
        "sgmm {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn generate(dir: &Path, name: &str, points: usize, clusters: usize) -> (PathBuf, PathBuf) {
    let data = dir.join(name);
    let centers = dir.join(format!("true-{name}"));
    run_ok(&[
        "generate",
        "--points",
        &points.to_string(),
        "--clusters",
        &clusters.to_string(),
        "--dim",
        "2",
        "--spread",
        "0.5",
        "--seed",
        "11",
        "--out",
        data.to_str().unwrap(),
        "--centers-out",
        centers.to_str().unwrap(),
    ]);
    (data, centers)
}

#[test]
fn generate_fit_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth) = generate(dir.path(), "data.csv", 800, 5);

    let report = dir.path().join("report.csv");
    let centers = dir.path().join("centers.csv");
    run_ok(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "dgmm",
        "--clusters",
        "5",
        "--trunc",
        "3",
        "--cands",
        "2",
        "--seed",
        "3",
        "--out",
        report.to_str().unwrap(),
        "--centers-out",
        centers.to_str().unwrap(),
    ]);

    let rows = sgmm::experiment::read_fit_csv(&mut std::fs::File::open(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].q > 0.0);
    assert!(rows[0].total_distance_evals > 0);

    let out = run_ok(&[
        "eval",
        "--input",
        data.to_str().unwrap(),
        "--centers",
        centers.to_str().unwrap(),
        "--ref-centers",
        truth.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v["q"].as_f64().unwrap() > 0.0);
    assert!(v["center_rmse"].as_f64().unwrap() >= 0.0);
}

#[test]
fn binary_data_format_works_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.bin", 300, 4);
    let bytes = std::fs::read(&data).unwrap();
    assert_eq!(&bytes[..4], b"SGMM");

    let out = run_ok(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "kmeans",
        "--clusters",
        "4",
    ]);
    assert!(!out.stdout.is_empty());
}

#[test]
fn coreset_emits_weighted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 500, 4);
    let coreset = dir.path().join("coreset.csv");
    run_ok(&[
        "coreset",
        "--input",
        data.to_str().unwrap(),
        "--size",
        "64",
        "--seed",
        "5",
        "--out",
        coreset.to_str().unwrap(),
    ]);
    let loaded = sgmm::io::read_data(&coreset).unwrap();
    assert_eq!(loaded.n_points(), 64);
    assert!(loaded.is_weighted());
    let head = std::fs::read_to_string(&coreset).unwrap();
    assert!(head.lines().next().unwrap().ends_with(",weight"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 100, 3);
    let out = bin()
        .args([
            "fit",
            "--input",
            data.to_str().unwrap(),
            "--algo",
            "dgmm",
            "--clusters",
            "4",
            "--trunc",
            "9",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation"));
}

#[test]
fn io_errors_exit_3() {
    let out = bin()
        .args([
            "fit",
            "--input",
            "/nonexistent/data.csv",
            "--algo",
            "kmeans",
            "--clusters",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Malformed file contents are also IO-class failures.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "d0,d1\n1.0,notanumber\n").unwrap();
    let out = bin()
        .args([
            "fit",
            "--input",
            bad.to_str().unwrap(),
            "--algo",
            "kmeans",
            "--clusters",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn json_fit_report_carries_config_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 200, 3);
    let out = run_ok(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "em",
        "--clusters",
        "3",
        "--eta",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "fit");
    assert_eq!(v["config"]["algorithm"], "em");
    let report = &v["reports"][0];
    assert!(!report["objective_trace"].as_array().unwrap().is_empty());
    assert!(report["eta"].is_number());
    assert!(report["speedup"].is_number());
}

#[test]
fn fixed_time_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 400, 4);
    let args = [
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "dgmm",
        "--clusters",
        "4",
        "--trunc",
        "2",
        "--cands",
        "2",
        "--reps",
        "3",
        "--seed",
        "21",
        "--fixed-time",
    ];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn results_are_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 2500, 6);
    let args = [
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "dgmm",
        "--clusters",
        "6",
        "--trunc",
        "3",
        "--cands",
        "3",
        "--seed",
        "9",
        "--fixed-time",
    ];
    let single = bin().args(args).env("SGMM_THREADS", "1").output().unwrap();
    let multi = bin().args(args).env("SGMM_THREADS", "4").output().unwrap();
    assert!(single.status.success() && multi.status.success());
    assert_eq!(single.stdout, multi.stdout);
}

#[test]
fn sweep_emits_one_row_per_value_and_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 600, 6);
    let out_path = dir.path().join("sweep.csv");
    run_ok(&[
        "sweep",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "dgmm",
        "--clusters",
        "6",
        "--trunc",
        "2",
        "--cands",
        "2",
        "--axis",
        "trunc",
        "--values",
        "2,3,4",
        "--reps",
        "2",
        "--seed",
        "13",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    let rows =
        sgmm::experiment::read_sweep_csv(&mut std::fs::File::open(&out_path).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows
        .iter()
        .all(|r| matches!(r.axis, sgmm::SweepAxis::Truncation)));
    let values: Vec<u64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(values, vec![2, 2, 3, 3, 4, 4]);
}

#[test]
fn stability_reports_all_pairs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate(dir.path(), "data.csv", 400, 4);
    let out = run_ok(&[
        "stability",
        "--input",
        data.to_str().unwrap(),
        "--algo",
        "kmeans",
        "--clusters",
        "4",
        "--runs",
        "4",
        "--seed",
        "2",
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stability: mean RMSE"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // Header plus 4*3/2 pair rows.
    assert_eq!(stdout.lines().count(), 1 + 6);
}

#[test]
fn generate_streams_csv_to_stdout() {
    let out = run_ok(&[
        "generate",
        "--points",
        "10",
        "--clusters",
        "2",
        "--dim",
        "3",
        "--seed",
        "4",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "d0,d1,d2");
    assert_eq!(text.lines().count(), 11);
}
