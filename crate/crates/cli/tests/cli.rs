use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CONSTANT: &str = r#"{"kind":"constant","a":0.25,"b":0.5,"c":0.25}"#;
const FORCE: &str = r#"{"kind":"force","a":0.125,"c":0.375}"#;

fn zwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zwalk")).args(args).env_remove("ZWALK_NODES").output().unwrap()
}

fn spec(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn limits_of_symmetric_walk() {
    let dir = TempDir::new().unwrap();
    let c = spec(&dir, "c.json", CONSTANT);
    let out = zwalk(&["limits", "--spec", s(&c)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["H"], 0.5);
    assert_eq!(v["Hprime"], 0.5);
    assert_eq!(v["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["provenance"]["spec_sha256"].as_str().unwrap().len(), 64);
    let summary = String::from_utf8(out.stderr).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let c = spec(&dir, "c.json", CONSTANT);
    let f = spec(&dir, "f.json", FORCE);
    assert_eq!(zwalk(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(zwalk(&["factorize", "--spec", s(&c), "--order", "ul"]).status.code(), Some(1));
    let bad = spec(&dir, "bad.json", r#"{"kind":"constant","a":0.5,"b":0.5,"c":0.5}"#);
    assert_eq!(zwalk(&["limits", "--spec", s(&bad)]).status.code(), Some(1));
    let out = zwalk(&["factorize", "--spec", s(&c), "--order", "ul", "--param", "0.6"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("0.6"));
    let out = zwalk(&["verify", "--spec", s(&f), "--param", "0.75", "--tol", "1e-18"]);
    assert_eq!(out.status.code(), Some(2));
    let out = zwalk(&["verify", "--spec", s(&f), "--param", "0.75"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["report"]["pass"], true);
}

#[test]
fn darboux_of_force_walk_changes_origin_only() {
    let dir = TempDir::new().unwrap();
    let f = spec(&dir, "f.json", FORCE);
    let out_path = dir.path().join("d.json");
    let out = zwalk(&["darboux", "--spec", s(&f), "--order", "ul", "--param", "0.75", "--window", "6", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["rows_changed"], 1);
    assert_eq!(v["walk"]["kind"], "table");
    assert_eq!(v["provenance"]["param"], 0.75);
    assert_eq!(v["provenance"]["window"], 6);
}

#[test]
fn csv_spectrum_header() {
    let dir = TempDir::new().unwrap();
    let c = spec(&dir, "c.json", CONSTANT);
    // support reaches 0 with an inverse square root, so dividing by x diverges
    let out = zwalk(&["spectrum-darboux", "--spec", s(&c), "--order", "lu", "--param", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    let c = spec(&dir, "e.json", r#"{"kind":"constant","a":0.125,"b":0.75,"c":0.125}"#);
    let out = zwalk(&["spectrum-darboux", "--spec", s(&c), "--order", "lu", "--param", "0.5", "--samples", "7", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,entry_11,entry_12,entry_21,entry_22"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn polys_table() {
    let dir = TempDir::new().unwrap();
    let c = spec(&dir, "c.json", CONSTANT);
    let v = json(&zwalk(&["polys", "--spec", s(&c), "--family", "q", "--window", "3"]));
    // Q₁¹ = 4x − 2
    let row1 = &v["family"]["rows"][(1 - v["family"]["lo"].as_i64().unwrap()) as usize];
    assert_eq!(row1[0], serde_json::json!([-2.0, 4.0]));
    assert_eq!(zwalk(&["polys", "--spec", s(&c), "--family", "s"]).status.code(), Some(1));
    let out = zwalk(&["polys", "--spec", s(&c), "--family", "qhat", "--param", "0.5", "--window", "3"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn nodes_from_environment() {
    let dir = TempDir::new().unwrap();
    let c = spec(&dir, "c.json", CONSTANT);
    let out = Command::new(env!("CARGO_BIN_EXE_zwalk"))
        .args(["spectrum", "--spec", s(&c), "--samples", "3"])
        .env("ZWALK_NODES", "96")
        .output()
        .unwrap();
    assert_eq!(json(&out)["provenance"]["nodes"], 96);
    let out = zwalk(&["spectrum", "--spec", s(&c), "--samples", "3", "--nodes", "64"]);
    assert_eq!(json(&out)["provenance"]["nodes"], 64);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let c = spec(&dir, "c.json", CONSTANT);
    let run = |name: &str| {
        let p = dir.path().join(name);
        let args = ["simulate", "--spec", s(&c), "--steps", "4", "--paths", "20000", "--seed", "11", "--out", s(&p)];
        assert_eq!(zwalk(&args).status.code(), Some(0));
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn worked_examples() {
    for example in ["4.1", "4.2"] {
        let out = zwalk(&["reproduce-paper", "--example", example]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_eq!(v["pass"], true);
        assert_eq!(v["verification"]["pass"], true);
    }
}
