use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use confdef::io::{read_field_csv, write_field_csv};
use serde_json::Value;

fn confdef(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confdef")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn gallery_emits_verdicts_table_and_lossless_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = confdef(&["gallery", "--out", out, "--refine", "2", "--emit-csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "gallery.json");
    assert_eq!(s["passed"], true);
    let rows = s["report"]["christoffel"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        let ratio = r["ratio"].as_f64().unwrap();
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }
    let verdict = |name: &str| s["report"]["candidates"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["status"].clone();
    assert_eq!(verdict("const_v"), "member");
    assert_eq!(verdict("u_from_lambda"), "member");
    assert_eq!(verdict("polynomial"), "non_member");
    for f in s["files"].as_array().unwrap() {
        let p = dir.path().join(f.as_str().unwrap());
        let (field, names) = read_field_csv(&p).unwrap();
        let again = dir.path().join("again.csv");
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        write_field_csv(&again, &field, &refs).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&again).unwrap());
    }
    let v = confdef(&["verify", out]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn identical_configs_give_identical_summaries() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = confdef(&["triple", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(a.path().join("triple.json")).unwrap(), fs::read(b.path().join("triple.json")).unwrap());
}

#[test]
fn non_member_is_refused_at_membership() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"pipeline": {"member": "polynomial"}}"#).unwrap();
    let o = confdef(&["deform", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let s = summary(dir.path(), "deform.json");
    assert_eq!(s["failure"]["stage"], "membership");
    assert!(s["failure"]["residual"].as_f64().unwrap() > 1e-2);
    assert!(s["report"]["triple"].is_null());
}

#[test]
fn tightened_tolerances_fail_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = confdef(&["cs-check", "--out", dir.path().to_str().unwrap(), "--tol-scale", "1e-6"]);
    assert_eq!(code(&o), 2);
    let s = summary(dir.path(), "cs_check.json");
    let failed: Vec<&str> =
        s["verdicts"].as_array().unwrap().iter().filter(|v| v["pass"] == false).map(|v| v["name"].as_str().unwrap()).collect();
    assert_eq!(failed, vec!["membership.u_from_lambda.member"]);
}

#[test]
fn usage_and_io_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&confdef(&["gallery", "--bogus"])), 1);
    assert_eq!(code(&confdef(&["nonsense"])), 1);
    assert_eq!(code(&confdef(&["gallery", "--config", "/nonexistent/cfg.json"])), 1);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"gallery": {"samples": 3}}"#).unwrap();
    let o = confdef(&["gallery", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 5"));
    assert_eq!(code(&confdef(&["verify", "/nonexistent/dir"])), 1);
    assert_eq!(code(&confdef(&["--help"])), 0);
}

#[test]
fn pipeline_end_to_end_is_reproducible_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = confdef(&["pipeline", "--out", out, "--emit-csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(dir.path(), "pipeline.json");
    let d = &s["report"]["deform"];
    assert!(d["conformality"].as_f64().unwrap() <= 10.0 * 0.05 * 0.05);
    for k in ["gauss", "codazzi", "ricci"] {
        assert!(d["structure"][k].as_f64().unwrap().is_finite());
    }
    assert!(s["report"]["triple"]["distances"][0]["distance"].as_f64().unwrap() > 1e-3);
    let kinds: Vec<&str> = s["rechecks"].as_array().unwrap().iter().map(|r| r["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"membership") && kinds.contains(&"conformality") && kinds.contains(&"light_cone"));
    let v = confdef(&["verify", out]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stdout));
}
