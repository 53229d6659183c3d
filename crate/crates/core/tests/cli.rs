use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn biharm(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_biharm"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).expect("utf-8 output"),
    )
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn verify_catalog_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let csv = dir.path().join("grids");
    std::fs::create_dir(&csv).unwrap();
    let (code, _) = biharm(&[
        "verify",
        "--tol",
        "1e-6",
        "--mode",
        "analytic",
        "--out",
        a.to_str().unwrap(),
        "--csv-dir",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _) = biharm(&[
        "verify",
        "--tol",
        "1e-6",
        "--mode",
        "analytic",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    assert_eq!(v["format"], "biharm-report");
    for label in ["cosh4", "y4", "hyperbolic(-1)"] {
        let case = v["cases"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["case_label"] == label)
            .unwrap();
        assert_eq!(case["verdict"], "pass");
        assert_eq!(v["details"]["classes"][label], "proper_biharmonic");
    }
    let table = std::fs::read_to_string(csv.join("cosh4.csv")).unwrap();
    assert!(table.starts_with("axis1,axis2,r1,r2\n"));
    assert_eq!(table.lines().count(), 1 + 21 * 21);
}

#[test]
fn fd_mode_defaults_to_relaxed_tolerance() {
    let (code, out) = biharm(&["verify", "--mode", "fd", "--case", "cosh4", "--grid", "7"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["cases"][0]["tolerance"], 1e-3);
    assert_eq!(v["cases"].as_array().unwrap().len(), 1);
}

#[test]
fn scan_reports_root() {
    let (code, out) = biharm(&["scan", "--c", "-2", "--range", "0.1:3"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let root = v["details"]["roots"][0]["slope"].as_f64().unwrap();
    assert!((root - std::f64::consts::SQRT_2).abs() < 1e-8);
    let (code, out) = biharm(&["scan", "--c", "1"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["details"]["roots"].as_array().unwrap().is_empty());
}

#[test]
fn surface_cylinder() {
    let (code, out) = biharm(&["surface", "--kg", "1", "--K", "1"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(
        v["details"]["classification"],
        "proper_biharmonic_vertical_cylinder"
    );
    assert_eq!(
        v["details"]["hopf_residuals"],
        serde_json::json!([0.0, 0.0])
    );
    let (code, _) = biharm(&["surface", "--kg", "2", "--K", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn construct_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("alpha.txt");
    let (code, out) = biharm(&[
        "construct",
        "--alpha0",
        "0.7853981633974483",
        "--alpha1",
        "0.1",
        "--u0",
        "-1",
        "--yspan",
        "0:1",
        "--step",
        "1e-3",
        "--tol",
        "1e-4",
        "--grid",
        "9",
        "--profile-out",
        prof.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    let text = std::fs::read_to_string(&prof).unwrap();
    assert!(text.starts_with("y alpha alpha1 alpha2\n"));
    assert_eq!(text.lines().count(), 1002);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["details"]["class"], "proper_biharmonic");
}

#[test]
fn curvature_dump() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = biharm(&[
        "curvature",
        "--case",
        "y4",
        "--grid",
        "5",
        "--csv-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let table = std::fs::read_to_string(dir.path().join("y4-curvature.csv")).unwrap();
    assert!(table.starts_with("axis1,axis2,k_domain,k_target\n"));
}

#[test]
fn argument_errors_exit_2() {
    assert_eq!(biharm(&["frobnicate"]).0, 2);
    assert_eq!(biharm(&["verify", "--grid", "1"]).0, 2);
    assert_eq!(biharm(&["verify", "--tol", "-1"]).0, 2);
    assert_eq!(biharm(&["verify", "--case", "nope"]).0, 2);
    assert_eq!(biharm(&["scan", "--c", "-2", "--range", "3:1"]).0, 2);
    assert_eq!(biharm(&["construct", "--alpha1", "0"]).0, 2);
}
