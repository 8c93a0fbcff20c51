use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use capillary::{BodyRecord, Tolerances};
use serde_json::Value;

const THETA: &str = "1.0471975512";

fn caplp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caplp")).args(args).output().expect("caplp runs")
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid json")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn solve_into(dir: &Path, tag: &str) -> Output {
    let p = |name: &str| dir.join(format!("{tag}_{name}")).to_string_lossy().into_owned();
    caplp(&[
        "solve", "--n", "2", "--theta", THETA, "--p", "0", "--phi", "cos2k:1,1,0.3", "--grid", "129",
        "--out", &p("result.json"), "--trace", &p("trace.csv"), "--body-out", &p("body.json"), "--embed-out",
        &p("embed.csv"),
    ])
}

#[test]
fn solve_writes_monotone_trace_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "a");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = fs::read_to_string(dir.path().join("a_trace.csv")).unwrap();
    assert!(trace.starts_with("i,V,A,Omega,ratio,residual,gamma,max_sigma1\n"));
    let a = column(&trace, "A");
    let v = column(&trace, "V");
    assert!(a.len() > 1);
    for w in a.windows(2) {
        assert!(w[1] >= w[0] - 1e-10 * w[0].abs());
    }
    for w in v.windows(2) {
        assert!(w[1] <= w[0] + 1e-10 * w[0].abs());
    }

    let result = json_of(&fs::read(dir.path().join("a_result.json")).unwrap());
    for key in ["n", "theta", "p", "phi_spec", "converged", "iterations", "V", "residual_final", "support", "f", "cap_measure", "seed"] {
        assert!(result.get(key).is_some(), "missing {key}");
    }
    assert_eq!(result["converged"], Value::Bool(true));
    assert!(result["residual_final"].as_f64().unwrap() <= 1e-5);
    assert!((result["cap_measure"].as_f64().unwrap() - 2.0 * 1.0471975512).abs() < 1e-12);
}

#[test]
fn solve_is_deterministic_and_body_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert!(solve_into(dir.path(), "a").status.success());
    assert!(solve_into(dir.path(), "b").status.success());
    for name in ["result.json", "trace.csv", "body.json", "embed.csv"] {
        let x = fs::read(dir.path().join(format!("a_{name}"))).unwrap();
        let y = fs::read(dir.path().join(format!("b_{name}"))).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    let record = BodyRecord::from_json(&fs::read_to_string(dir.path().join("a_body.json")).unwrap()).unwrap();
    let body = record.to_body(Tolerances::default()).unwrap();
    let result = json_of(&fs::read(dir.path().join("a_result.json")).unwrap());
    assert_eq!(body.support().values(), floats(&result["support"]).as_slice());
    assert_eq!(body.volume(), result["V"].as_f64().unwrap());
}

#[test]
fn minkowski_recovers_the_unit_cap() {
    let out = caplp(&["minkowski", "--n", "2", "--theta", THETA, "--phi", "const:1"]);
    assert!(out.status.success());
    let v = json_of(&out.stdout);
    let beta = floats(&v["beta"]);
    let s = floats(&v["support"]);
    let h = beta[1] - beta[0];
    let err = beta.iter().zip(&s).map(|(b, s)| (s - (1.0 - 0.5 * b.cos())).abs()).fold(0.0, f64::max);
    assert!(err <= 10.0 * h * h, "{err}");
}

#[test]
fn functionals_and_embed_accept_a_body_file() {
    let dir = tempfile::tempdir().unwrap();
    let body = dir.path().join("cap.json").to_string_lossy().into_owned();
    let out = caplp(&["minkowski", "--n", "3", "--theta", "0.7", "--grid", "65", "--phi", "const:4", "--out", &body]);
    assert!(out.status.success());

    let out = caplp(&["functionals", "--body", &body, "--p", "-0.5", "--phi", "znpoly:1,0.5"]);
    assert!(out.status.success());
    let rep = json_of(&out.stdout);
    for key in ["A", "B", "Omega", "V"] {
        assert!(rep[key].as_f64().unwrap() > 0.0);
    }

    let out = caplp(&["embed", "--body", &body]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let x3 = column(&csv, "x3");
    assert!(x3.first().unwrap().abs() < 1e-6 && x3.last().unwrap().abs() < 1e-6);
}

#[test]
fn errors_are_json_on_stderr() {
    let out = caplp(&["solve", "--theta", THETA, "--p", "0", "--phi", "const:1,2"]);
    assert!(!out.status.success());
    let err = json_of(&out.stderr);
    assert_eq!(err["error"], "grammar");

    let out = caplp(&["minkowski", "--theta", "2.0", "--phi", "const:1"]);
    assert!(!out.status.success());
    assert_eq!(json_of(&out.stderr)["error"], "parameter");

    let out = caplp(&["functionals", "--p", "0", "--phi", "const:1"]);
    assert!(!out.status.success());
    assert_eq!(json_of(&out.stderr)["error"], "usage");
}

#[test]
fn verify_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.json").to_string_lossy().into_owned();
    let out = caplp(&["verify", "--quick", "--out", &rows]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}");
    assert!(!table.contains("FAIL"));
    let v = json_of(&fs::read(&rows).unwrap());
    assert!(v.as_array().unwrap().iter().all(|r| r["passed"] == Value::Bool(true)));
}
