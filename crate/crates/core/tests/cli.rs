//! Command-line behaviour: exit codes, outputs, and error reporting.

use std::path::Path;
use std::process::{Command, Output};

use cesar::io::{load_gsf, save_gsf};
use cesar::{Field3, GridSeries};

fn cesar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cesar")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn wind(dir: &Path, values: Vec<f64>) -> std::path::PathBuf {
    let n = values.len();
    let series = GridSeries::new(vec![Field3::from_vec(1, n, 1, values).unwrap()], 3600.0, vec!["wspd".into()]).unwrap();
    let path = dir.join("wind.gsf");
    save_gsf(&path, &series).unwrap();
    path
}

#[test]
fn missing_data_file_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cesar(&["train", "--data", "/no/such/file.gsf", "--out-model", s(&dir.path().join("m.csr"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.gsf"));
    let out = cesar(&["power", "--data", "/no/such/wind.gsf", "--out", s(&dir.path().join("p.gsf"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = cesar(&["simulate-burgers", "--grid", "8", "--steps", "5", "--seeds", "3", "--out-dir", s(dir.path())]);
    assert!(out.status.success());
    for i in 0..3 {
        let series = load_gsf(&dir.path().join(format!("burgers_{i:02}.gsf"))).unwrap();
        assert_eq!(series.dims(), [5, 8, 8, 2]);
    }
    let bad = cesar(&["simulate-burgers", "--grid", "7", "--seeds", "1", "--out-dir", s(dir.path())]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn power_of_zero_and_rated_wind() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("p.gsf");
    let zero = wind(dir.path(), vec![0.0; 4]);
    let out = cesar(&["power", "--data", s(&zero), "--out", s(&out_path)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean_kw: 0.000000"));
    assert!(load_gsf(&out_path).unwrap().frames[0].as_slice().iter().all(|&p| p == 0.0));

    let rated = wind(dir.path(), vec![13.0; 4]);
    let out = cesar(&["power", "--data", s(&rated), "--source-height", "80", "--out", s(&out_path)]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean_kw: 2500.000000") && stdout.contains("std_kw: 0.000000"), "{stdout}");
}

#[test]
fn malformed_curve_fails() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    std::fs::write(&curve, "speed_ms,power_kw\n5.0,10\n4.0,20\n").unwrap();
    let data = wind(dir.path(), vec![5.0; 2]);
    let out = cesar(&["power", "--data", s(&data), "--curve", s(&curve), "--out", s(&dir.path().join("p.gsf"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn forecast_rejects_too_many_reservoir_draws() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cesar(&["simulate-burgers", "--grid", "8", "--steps", "24", "--seeds", "1", "--out-dir", s(d)]).status.success());
    let data = d.join("burgers_00.gsf");
    let model = d.join("m.csr");
    let train = cesar(&[
        "train", "--data", s(&data), "--train-frames", "20", "--cae-filters", "2", "--cae-epochs", "1",
        "--esn-nh", "8", "--ensemble", "2", "--out-model", s(&model),
    ]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let fc = |n: &str| {
        cesar(&["forecast", "--model", s(&model), "--data", s(&data), "--horizon", "4", "--n-temporal", n, "--out-dir", s(&d.join("fc"))])
    };
    assert_eq!(fc("3").status.code(), Some(1));
    let ok = fc("2");
    assert!(ok.status.success());
    assert!(d.join("fc/report.csv").is_file() && d.join("fc/lower_95.gsf").is_file());
}
