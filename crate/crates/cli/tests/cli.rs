use std::path::Path;
use std::process::{Command, Output};

use bms_cli::io::{emit_trace, load_points, InputError};
use bms_core::engine::{run_bms, IterationRecord, StopRule};
use bms_core::{Configuration, KernelId, KernelSpec};

fn bms(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bms"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run bms")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn load_points_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "a.csv", "1,2\n3,4\n5,6\n");
    write(p, "b.csv", "x,y\n1,2\n3,4\n");
    write(p, "c.json", "[[1,2],[3,4]]");
    write(p, "bad.csv", "1,2\n3,abc\n");
    let a = load_points(&p.join("a.csv"), None).unwrap();
    assert_eq!((a.n(), a.d()), (3, 2));
    assert_eq!(load_points(&p.join("b.csv"), None).unwrap().n(), 2);
    assert_eq!(load_points(&p.join("c.json"), None).unwrap().point(1), &[3.0, 4.0]);
    let err = load_points(&p.join("bad.csv"), None).unwrap_err();
    assert!(matches!(err, InputError::Cell { row: 2, col: 2, .. }));
    let err = load_points(&p.join("missing.csv"), None).unwrap_err();
    assert!(err.to_string().contains("missing.csv"), "{err}");
}

#[test]
fn trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Configuration::from_rows(&[[0.0, 0.0], [0.3, 0.1], [1.0 / 3.0, 0.7], [5.0, 5.0]]).unwrap();
    let k = KernelSpec::builtin(KernelId::Gaussian).unwrap();
    let out = run_bms(&cfg, &k, 0.7, &StopRule::exact(25)).unwrap();
    let path = dir.path().join("t.jsonl");
    emit_trace(&out.records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back: Vec<IterationRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, out.records);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["t", "L", "d", "rho", "max_move", "M", "closed", "singular", "stable"] {
        assert!(first.get(key).is_some(), "{key}");
    }

    emit_trace(&out.records[..1], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    emit_trace(&[], &path).unwrap();
    assert!(std::fs::read(&path).unwrap().is_empty());
}

#[test]
fn cluster_writes_result_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "pts.csv", "x,y\n0,0\n0.1,0\n0,0.1\n5,5\n5.1,5\n");
    let out = bms(&["cluster", "--input", "pts.csv", "--h", "0.5", "--out", "r.json", "--trace", "t.jsonl"], p);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["labels"], serde_json::json!([1, 1, 1, 2, 2]));
    assert_eq!(r["M"], 2);
    assert_eq!(r["stop_reason"], "exact_fixed_point");
    let lines = std::fs::read_to_string(p.join("t.jsonl")).unwrap().lines().count();
    assert_eq!(lines as u64, r["T"].as_u64().unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(bms(&["generate", "--dataset", "blobs", "--n", "150", "--out", "pts.csv"], p).status.code(), Some(0));
    write(p, "bad.csv", "1,2\n3,abc\n");

    let ok = bms(&["verify", "--input", "pts.csv", "--standardize", "--kernel", "epanechnikov", "--h", "0.5", "--fuzz", "100", "--out", "v.json"], p);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("v.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["run"]["checks"].as_array().unwrap().len(), 9);

    let injected = bms(&["verify", "--input", "pts.csv", "--standardize", "--h", "0.5", "--inject-descent", "--out", "v2.json"], p);
    assert_eq!(injected.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("v2.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], false);

    let parse = bms(&["cluster", "--input", "bad.csv", "--h", "0.5"], p);
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("row 2, column 2"));

    assert_eq!(bms(&["cluster", "--input", "pts.csv", "--h", "0"], p).status.code(), Some(2));
    assert_eq!(bms(&["cluster", "--input", "pts.csv", "--h", "0.5", "--kernel", "nope"], p).status.code(), Some(2));
    assert_eq!(bms(&["frobnicate"], p).status.code(), Some(2));
    assert_eq!(bms(&["--help"], p).status.code(), Some(0));
}

#[test]
fn gaussian_verify_on_random_points() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(bms(&["generate", "--dataset", "no_structure", "--n", "500", "--out", "pts.csv"], p).status.code(), Some(0));
    let out = bms(&["verify", "--input", "pts.csv", "--kernel", "gaussian", "--h", "0.05", "--max-iter", "200", "--move-tol", "0", "--directions", "64"], p);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["run"]["steps"], 200);
}

#[test]
fn oracle_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = bms(&["oracle", "simplex", "--kernel", "gaussian", "--n", "2", "--d", "1", "--h", "1", "--r0", "0.99", "--steps", "10", "--out", "s.csv"], p);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(p.join("s.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t,r_oracle,r_sim,ratio"));
    assert_eq!(text.lines().count(), 12);
    assert!(!text.contains("NaN"));

    let out = bms(&["oracle", "population", "--s0", "1.0", "--h", "1.0", "--steps", "30"], p);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 32);
    assert!(text.lines().nth(2).unwrap().starts_with("1,5e-1,"));
}

#[test]
fn sweep_reports_every_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    bms(&["generate", "--dataset", "blobs", "--n", "100", "--out", "pts.csv"], p);
    let out = bms(&["sweep", "--input", "pts.csv", "--standardize", "--h-min", "0.03", "--h-max", "3.0", "--h-step", "0.03"], p);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 100);
    assert_eq!(rows[99]["M"], 1);
    assert!(rows.iter().all(|r| r.get("L_final").is_some() && r.get("T").is_some()));
}
