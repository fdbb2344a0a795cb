use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mod1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mod1")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = mod1(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Header and rows of a CSV file.
fn table(p: impl AsRef<Path>) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(p: impl AsRef<Path>, name: &str) -> Vec<f64> {
    let (header, rows) = table(p);
    let c = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[c].parse().unwrap()).collect()
}

#[test]
fn simulate_f1_gaussian() {
    let dir = TempDir::new().unwrap();
    let s = path(&dir, "s.csv");
    ok(&["simulate", "--function", "f1", "--n", "500", "--noise", "gaussian", "--sigma", "0.1", "--seed", "42", "--out", &s]);
    let (header, rows) = table(&s);
    assert_eq!(header, ["index", "x1", "y", "clean_f"]);
    assert_eq!(rows.len(), 500);
    assert!(column(&s, "y").iter().all(|y| (0.0..1.0).contains(y)));
}

#[test]
fn zero_bounded_noise_keeps_clean_residues() {
    let dir = TempDir::new().unwrap();
    let s = path(&dir, "s.csv");
    ok(&["simulate", "--n", "200", "--noise", "bounded", "--gamma", "0", "--out", &s]);
    for (y, f) in column(&s, "y").iter().zip(column(&s, "clean_f")) {
        assert_eq!(*y, f.rem_euclid(1.0));
    }
}

#[test]
fn fxy_grid_size_and_blind_output() {
    let dir = TempDir::new().unwrap();
    let s = path(&dir, "s.csv");
    ok(&["simulate", "--function", "fxy", "--m", "122", "--blind", "--out", &s]);
    let (header, rows) = table(&s);
    assert_eq!(header, ["index", "x1", "x2", "y"]);
    assert_eq!(rows.len(), 14884);
}

#[test]
fn zero_lambda_returns_input() {
    let dir = TempDir::new().unwrap();
    let (s, r) = (path(&dir, "s.csv"), path(&dir, "r.csv"));
    ok(&["simulate", "--n", "100", "--sigma", "0.1", "--out", &s]);
    ok(&["denoise", "--method", "trs", "--lambda", "0", "--input", &s, "--out", &r]);
    for (y, rh) in column(&s, "y").iter().zip(column(&r, "r_hat")) {
        let d = (y - rh).abs();
        assert!(d.min(1.0 - d) < 1e-12, "{y} vs {rh}");
    }
}

#[test]
fn noiseless_pipeline() {
    let dir = TempDir::new().unwrap();
    let [s, r, f, m] = ["s.csv", "r.csv", "f.csv", "m.csv"].map(|n| path(&dir, n));
    ok(&["simulate", "--n", "500", "--sigma", "0", "--out", &s]);
    ok(&["denoise", "--input", &s, "--out", &r]);
    ok(&["unwrap", "--input", &r, "--out", &f]);
    ok(&["evaluate", "--samples", &s, "--denoised", &r, "--unwrapped", &f, "--out", &m]);
    let (header, rows) = table(&m);
    assert_eq!(rows.len(), 1);
    assert!(header.iter().any(|h| h == "shift"));
    assert!(column(&m, "rmse_f_after_shift")[0] <= 1e-2);
}

#[test]
fn quotient_tracker_rejects_grids() {
    let dir = TempDir::new().unwrap();
    let (s, f) = (path(&dir, "s.csv"), path(&dir, "f.csv"));
    ok(&["simulate", "--function", "fxy", "--m", "10", "--out", &s]);
    let out = mod1(&["unwrap", "--method", "qt", "--input", &s, "--out", &f]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quotient tracker requires d=1"));
}

#[test]
fn malformed_input_reports_line() {
    let dir = TempDir::new().unwrap();
    let s = path(&dir, "bad.csv");
    fs::write(&s, "index,x1,y\n0,0.0,0.1\n1,0.5,abc\n").unwrap();
    let out = mod1(&["denoise", "--input", &s, "--out", &path(&dir, "r.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(mod1(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_runtime_error() {
    let dir = TempDir::new().unwrap();
    let out = mod1(&["denoise", "--input", &path(&dir, "none.csv"), "--out", &path(&dir, "r.csv")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_sweep_is_cartesian_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let [a, b, sum] = ["a.csv", "b.csv", "sum.csv"].map(|n| path(&dir, n));
    let args = |out: &str, threads: &str| {
        vec![
            "experiment".to_string(),
            "--n".into(), "100".into(),
            "--k".into(), "2,3,5".into(),
            "--lambda".into(), "0.03,0.1,0.3,0.5,1".into(),
            "--noise".into(), "bounded".into(),
            "--levels".into(), "0.1,0.2".into(),
            "--trials".into(), "2".into(),
            "--seed".into(), "9".into(),
            "--parallel".into(), threads.into(),
            "--out".into(), out.into(),
        ]
    };
    let run = |v: Vec<String>| ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    let mut first = args(&a, "1");
    first.extend(["--summary".into(), sum.clone()]);
    run(first);
    run(args(&b, "4"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (_, rows) = table(&a);
    assert_eq!(rows.len(), 3 * 5 * 2 * 2);
    assert!(column(&a, "wrap_rmse_mod1").iter().all(|w| (0.0..=0.5).contains(w)));
    assert_eq!(table(&sum).1.len(), 3 * 5 * 2);
}

#[test]
fn thread_count_from_environment() {
    let dir = TempDir::new().unwrap();
    let [a, b] = ["a.csv", "b.csv"].map(|n| path(&dir, n));
    let base = ["experiment", "--n", "80", "--lambda", "0.1,0.3", "--trials", "3"];
    ok(&[&base[..], &["--out", &a]].concat());
    let out = Command::new(env!("CARGO_BIN_EXE_mod1"))
        .args([&base[..], &["--out", &b]].concat())
        .env("MOD1_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
