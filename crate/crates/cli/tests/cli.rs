use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn otdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otdr"))
        .args(args)
        .env("OTDR_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let o = otdr(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let h = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    (h, rows)
}

/// Deterministic standard normals (LCG + Box-Muller).
fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut u = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| (-2.0 * u().ln()).sqrt() * (2.0 * std::f64::consts::PI * u()).cos())
        .collect()
}

fn write_data(dir: &Path, n: usize, p: usize, seed: u64, f: impl Fn(usize, &[f64]) -> f64) -> PathBuf {
    let z = normals(n * p, seed);
    let mut s = String::from("y");
    for j in 1..=p {
        s += &format!(",x{j}");
    }
    s.push('\n');
    for i in 0..n {
        let row = &z[i * p..(i + 1) * p];
        s += &f(i, row).to_string();
        for v in row {
            s += &format!(",{v}");
        }
        s.push('\n');
    }
    let path = dir.join("data.csv");
    fs::write(&path, s).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn three_row_file_gives_n_three() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    fs::write(&data, "y,x\n1.0,0.5\n2.5,1.5\n2.0,3.0\n").unwrap();
    let out = tmp.path().join("out");
    ok(&["fit", "--data", s(&data), "--response", "y", "--method", "ols", "--out", s(&out)]);
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["n"], 3);
    assert_eq!(sum["p"], 1);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn missing_value_reports_its_row() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    fs::write(&data, "y,x\n1.0,0.5\nNA,1.5\n2.0,3.0\n").unwrap();
    let out = tmp.path().join("out");
    let o = otdr(&["fit", "--data", s(&data), "--response", "y", "--out", s(&out)]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "ParseError");
    assert_eq!(err["error"]["row"], 2);
    assert_eq!(json(out.join("error.json")), err);
}

#[test]
fn missing_file_is_a_clean_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = otdr(&["fit", "--data", "/no/such.csv", "--response", "y", "--out", s(tmp.path())]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "FileNotFound");
}

#[test]
fn noiseless_linear_response_gives_first_axis() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 60, 4, 1, |_, x| x[0]);
    let out = tmp.path().join("out");
    ok(&["fit", "--data", s(&data), "--response", "y", "--method", "ols", "--out", s(&out)]);
    let (h, rows) = read_csv(out.join("directions.csv"));
    assert_eq!(h, ["predictor", "dir1"]);
    let d: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((d[0].abs() / len - 1.0).abs() < 1e-12);
    assert!(d[1..].iter().all(|v| v.abs() < 1e-10 * len));
    assert_eq!(rows[0][0], "x1");
}

#[test]
fn excluded_rows_stay_in_the_essp_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 40, 3, 2, |_, x| (1.0 + 0.5 * x[0] - 0.3 * x[2]).exp());
    let out = tmp.path().join("out");
    ok(&[
        "fit", "--data", s(&data), "--response", "y", "--method", "bc-ols", "--exclude-rows", "2,7",
        "--grid", "-1:1:0.5", "--out", s(&out),
    ]);
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["n"], 38);
    assert_eq!(sum["n_total"], 40);
    assert_eq!(sum["excluded_rows"], serde_json::json!([2, 7]));
    let chosen = sum["stages"][0]["chosen"].as_f64().unwrap();
    assert!([-1.0, -0.5, 0.0, 0.5, 1.0].contains(&chosen));
    assert_eq!(sum["rank_test"].as_array().unwrap().len(), 3);

    let (h, rows) = read_csv(out.join("essp.csv"));
    assert_eq!(h, ["row", "y", "t_y", "dir1", "excluded"]);
    assert_eq!(rows.len(), 40);
    let flagged: Vec<&str> = rows.iter().filter(|r| r[4] == "true").map(|r| r[0].as_str()).collect();
    assert_eq!(flagged, ["2", "7"]);
    assert!(rows.iter().all(|r| !r[2].is_empty()));

    let (_, trace) = read_csv(out.join("trace.csv"));
    assert_eq!(trace.len(), 5);
}

#[test]
fn two_stage_fit_writes_two_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 150, 5, 3, |i, x| {
        let e = normals(150, 99)[i];
        5.0 * (0.5 * (x[0] + 2.0 * x[1])).sin() + 0.5 * (0.5 * (x[2] - x[3])).powi(3) + 0.3 * e
    });
    let out = tmp.path().join("out");
    ok(&[
        "fit", "--data", s(&data), "--response", "y", "--method", "t2phd-tk|bc-ols", "--grid", "-2:2:0.5",
        "--grid", "-2:2:0.5", "--out", s(&out),
    ]);
    let (h, rows) = read_csv(out.join("directions.csv"));
    assert_eq!(h, ["predictor", "dir1", "dir2"]);
    assert_eq!(rows.len(), 5);
    let (_, trace) = read_csv(out.join("trace.csv"));
    assert_eq!(trace.iter().filter(|r| r[0] == "1").count(), 9);
    assert_eq!(trace.iter().filter(|r| r[0] == "2").count(), 9);
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["method"], "t2phd-tk|bc-ols");
    assert_eq!(sum["stages"][1]["criterion"], "tk");
}

#[test]
fn wrong_k_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 30, 3, 4, |_, x| x[0]);
    let o = otdr(&["fit", "--data", s(&data), "--response", "y", "--method", "ols", "--k", "2", "--out", s(tmp.path())]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "InvalidArgs");
}

#[test]
fn planted_outlier_ranks_first() {
    let tmp = tempfile::tempdir().unwrap();
    let e = normals(50, 77);
    let data = write_data(tmp.path(), 50, 3, 5, |i, x| {
        let base = x[0] + 0.5 * x[1] + 0.2 * e[i];
        if i == 16 { base - 25.0 * x[2].signum() } else { base }
    });
    let out = tmp.path().join("out");
    ok(&["influence", "--data", s(&data), "--response", "y", "--method", "ols", "--out", s(&out)]);
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["top"][0]["row"], 17);
    assert_eq!(sum["top"].as_array().unwrap().len(), 5);
    let (h, rows) = read_csv(out.join("influence.csv"));
    assert_eq!(h, ["row", "value"]);
    let idx: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(idx, (1..=50).collect::<Vec<_>>());
}

#[test]
fn influence_with_a_searched_transform() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 40, 2, 6, |_, x| (0.5 + 0.4 * x[0]).exp());
    let out = tmp.path().join("out");
    ok(&[
        "influence", "--data", s(&data), "--response", "y", "--method", "bc-ols", "--grid", "-1:1:0.25",
        "--exclude-rows", "1", "--out", s(&out),
    ]);
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["n"], 39);
    assert!(sum["param"].as_f64().is_some());
    let (_, rows) = read_csv(out.join("influence.csv"));
    assert_eq!(rows[0][0], "2");
}

#[test]
fn too_few_rows_for_influence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 4, 3, 7, |_, x| x[0]);
    let out = tmp.path().join("out");
    let o = otdr(&["influence", "--data", s(&data), "--response", "y", "--out", s(&out)]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "InvalidArgs");
    assert!(err["error"]["message"].as_str().unwrap().contains("p + 2"));
}

fn without_seconds(path: PathBuf) -> Vec<Vec<String>> {
    let (h, rows) = read_csv(path);
    let t = h.iter().position(|c| c == "seconds").unwrap();
    rows.into_iter()
        .map(|mut r| {
            r.remove(t);
            r
        })
        .collect()
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, workers: &str| {
        let out = tmp.path().join(dir);
        ok(&[
            "simulate", "--model", "M2", "--n", "500", "--p", "10", "--reps", "5", "--seed", "1", "--methods",
            "phd,t1phd-lambda", "--workers", workers, "--out", s(&out),
        ]);
        out
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert_eq!(without_seconds(a.join("results.csv")), without_seconds(b.join("results.csv")));
    assert_eq!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    let report = json(a.join("report.json"));
    assert_eq!(report["reps"], 5);
}

#[test]
fn four_methods_give_four_metric_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "simulate", "--model", "M2", "--n", "100", "--p", "5", "--reps", "2", "--methods",
        "phd,t1phd-rho,t1phd-lambda,t1phd-tk", "--out", s(&out),
    ]);
    let (h, rows) = read_csv(out.join("metrics.csv"));
    assert_eq!(h, ["replicate", "seed", "phd", "t1phd-rho", "t1phd-lambda", "t1phd-tk"]);
    assert_eq!(rows.len(), 2);
    let (_, long) = read_csv(out.join("results.csv"));
    assert_eq!(long.len(), 8);
}

#[test]
fn unknown_model_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = otdr(&["simulate", "--model", "M9", "--n", "50", "--methods", "phd", "--out", s(tmp.path())]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "InvalidConfig");
}

#[test]
fn bench_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ok(&["bench", "--n", "60,80", "--criteria", "lambda,tk", "--repeats", "1", "--out", s(&out)]);
    let (h, rows) = read_csv(out.join("timing.csv"));
    assert_eq!(h, ["criterion", "n", "seconds", "runs"]);
    assert_eq!(rows.len(), 4);
}
