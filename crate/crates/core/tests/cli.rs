mod common;

use std::process::{Command, Output};

fn invcmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invcmp")).args(args).output().unwrap()
}

fn path(rel: &str) -> String {
    common::root().join(rel).display().to_string()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(invcmp(&[]).status.code(), Some(1));
    assert_eq!(invcmp(&["compare", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(invcmp(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_writes_point_json() {
    let out = invcmp(&["analyze", &path("desk/01_count_up.ir"), "--domain", "zones", "--widening", "threshold"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let exit = rows.as_array().unwrap().iter().find(|r| r["point"] == "head.f").unwrap();
    assert_eq!(exit["formula"], "(and (<= i 100) (>= i 100))");
    assert_eq!(exit["dv"], serde_json::json!(["i"]));
    assert_eq!(exit["domain"], "zones");
}

#[test]
fn parse_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ir");
    std::fs::write(&bad, "proc p(q) { entry: q := r; return; }").unwrap();
    let out = invcmp(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("undeclared variable r"));
    assert_eq!(invcmp(&["analyze", "/nonexistent.ir"]).status.code(), Some(2));
}

#[test]
fn compare_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = invcmp(&[
        "compare",
        "--left-cfg",
        &path("walkthrough/left.cfg"),
        "--right-cfg",
        &path("walkthrough/right.cfg"),
        "--corpus",
        &path("walkthrough"),
        "--mode",
        "both",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.contains("I vs I~,minimal,Equivalent,2\n"));
    assert!(summary.contains("I vs I~,full,RightMorePrecise,3\n"));
    let report = invcmp(&["report", out_dir.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&report.stdout).contains("RightMorePrecise=1"));
}

#[test]
fn missing_solver_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = invcmp(&[
        "compare",
        "--left-cfg",
        &path("configs/z.cfg"),
        "--right-cfg",
        &path("configs/z_ths.cfg"),
        "--corpus",
        &path("desk"),
        "--backend",
        "extern",
        "--solver",
        "/nonexistent/solver",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
