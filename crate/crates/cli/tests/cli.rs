use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ONE_TYPE: &str = r#"{"machines": 1, "epsilon": "1/13", "types": [{"size": "169", "jobs": [1.0, 1.0]}]}"#;
const SMALL: &str = r#"{"machines": 1, "epsilon": "1/13", "types": [{"size": "3", "jobs": [0.5]}, {"size": "1", "jobs": [1.0]}]}"#;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernsched"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str], dir: &Path) -> Value {
    let out = bin(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn solvers_on_the_one_type_instance() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("i.json"), ONE_TYPE).unwrap();
    let v = json_ok(&["solve-exact", "--instance", "i.json", "--dump-policy", "e.json"], dir.path());
    assert_eq!(v["value"], 507.0);
    let v = json_ok(
        &[
            "solve-stratified",
            "--instance",
            "i.json",
            "--dump-policy",
            "s.json",
            "--diagnostics",
            "d.json",
        ],
        dir.path(),
    );
    assert_eq!(v["value"], 572.0);
    let d: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(d["relevant_time_points"], 2);
    assert_eq!(d["states"], 2);

    let v = json_ok(
        &["simulate", "--instance", "i.json", "--policy", "file:s.json", "--enumerate"],
        dir.path(),
    );
    assert_eq!(v["mean"], 572.0);
    assert_eq!(v["method"], "enum");
    let v = json_ok(
        &["simulate", "--instance", "i.json", "--policy", "file:e.json", "--enumerate"],
        dir.path(),
    );
    assert_eq!(v["mean"], 507.0);
}

#[test]
fn simulate_mc_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("i.json"), SMALL).unwrap();
    let args = [
        "simulate", "--instance", "i.json", "--policy", "exact", "--trials", "5000", "--seed", "11",
    ];
    let a = bin(&args, dir.path());
    let b = bin(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["method"], "mc");
    let mean = v["mean"].as_f64().unwrap();
    let se = v["stderr"].as_f64().unwrap();
    assert!((mean - 3.5).abs() <= 4.0 * se);
    for p in ["sept", "fixed", "stratified", "quasipoly"] {
        let v = json_ok(&["simulate", "--instance", "i.json", "--policy", p], dir.path());
        assert!(v["mean"].as_f64().unwrap() >= 3.5 - 1e-9, "{p}");
    }
}

#[test]
fn gen_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(&["gen", "--out", "inst", "--count", "3", "--seed", "5"], dir.path());
    assert_eq!(v["instances"].as_array().unwrap().len(), 3);
    let first = fs::read_to_string(dir.path().join("inst/5-0.json")).unwrap();
    json_ok(&["gen", "--out", "again", "--count", "3", "--seed", "5"], dir.path());
    assert_eq!(first, fs::read_to_string(dir.path().join("again/5-0.json")).unwrap());

    let v = json_ok(
        &["compare", "--instance", "inst/5-0.json", "--instance", "inst/5-1.json", "--out", "res"],
        dir.path(),
    );
    assert_eq!(v["rows"], 2);
    let csv = fs::read_to_string(dir.path().join("res/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("res/summary.json").exists());
}

#[test]
fn grid_dump_and_round() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("i.json"), ONE_TYPE).unwrap();
    let v = json_ok(&["grid-dump", "--instance", "i.json", "--members", "4"], dir.path());
    assert_eq!(v["p_circ"][0], "234");
    assert_eq!(v["q_members"][0][1], "13");
    assert_eq!(v["stretched_endpoints"][2], "252");
    let v = json_ok(&["round", "--instance", "i.json", "--mode", "powers", "--c", "7"], dir.path());
    assert_eq!(v["instance"]["types"][0]["size"], "343");
    assert_eq!(v["exponents"][0], 3);
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("i.json"), SMALL).unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"machines": 0, "epsilon": "1/13", "types": []}"#).unwrap();
    assert!(!bin(&["solve-exact", "--instance", "missing.json"], dir.path()).status.success());
    assert!(!bin(&["solve-exact", "--instance", "bad.json"], dir.path()).status.success());
    assert!(!bin(&["simulate", "--instance", "i.json", "--policy", "nope"], dir.path()).status.success());
    assert!(!bin(
        &["simulate", "--instance", "i.json", "--policy", "sept", "--trials", "0"],
        dir.path()
    )
    .status
    .success());
}
