use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cluster-ld"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn edited(src: &str, from: &str, to: &str, dir: &Path) -> PathBuf {
    let text = fs::read_to_string(configs().join(src)).unwrap();
    assert!(text.contains(from), "{from} not in {src}");
    let path = dir.join(src);
    fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

#[test]
fn bad_config_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = edited("ideal_gas.conf", "beta = 1", "beta = -1", dir);
    let out = run(&["validate"], &cfg, &dir.join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn ideal_validate_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(&["validate"], &configs().join("ideal_gas.conf"), dir);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("validate.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["pass"] == true));
}

#[test]
fn dense_rods_fail_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(&["validate"], &configs().join("tonks_dense.conf"), dir);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn empty_grid_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = edited("ideal_gas.conf", "u = 0.01, 0.1", "u =", dir);
    let out = run(&["deviations"], &cfg, &dir.join("out"));
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("out/deviations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("side,alpha,u"));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = configs().join("tonks.conf");
    let mut csvs = Vec::new();
    for t in ["1", "4"] {
        let out_dir = dir.join(t);
        let out = run(&["deviations", "--threads", t], &cfg, &out_dir);
        assert_eq!(out.status.code(), Some(0));
        csvs.push(fs::read(out_dir.join("deviations.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn free_gas_decay_fit_reports_no_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(&["coeffs"], &configs().join("ideal_gas.conf"), dir);
    assert_eq!(out.status.code(), Some(0));
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(text.contains("insufficient data"));
}

#[test]
fn rods_first_coefficient_near_excluded_length() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(&["coeffs"], &configs().join("tonks.conf"), dir);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("coeffs.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("50,1,")).unwrap();
    let value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    // finite-volume correction at L = 50 is about 1%
    assert!((value + 2.0).abs() < 0.05, "{value}");
    assert!(dir.join("coeffs_inf.json").exists());
}
