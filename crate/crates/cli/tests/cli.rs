use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ncdomain::cpmap::MatrixTuple;
use ncdomain::harness::{emit_instance, Instance};
use ncdomain::symbol::FreeSymbol;
use serde_json::Value;

fn ncdomain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncdomain")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn json_report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write_instance(dir: &tempfile::TempDir, name: &str, inst: &Instance) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, emit_instance(inst)).unwrap();
    p
}

#[test]
fn quick_suite_passes_with_seed_7() {
    let out = ncdomain(&["suite", "--seed", "7", "--quick", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json_report(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["sections"].as_array().unwrap().len(), 10);
}

#[test]
fn zero_tuple_is_in_every_domain_with_zero_radius() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance::new(FreeSymbol::linear(3), 3, MatrixTuple::zeros(3, 2)).unwrap();
    let p = write_instance(&dir, "zero.json", &inst);
    let out = ncdomain(&["analyze", p.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_report(&out);
    assert_eq!(r["certificates"]["r_f"], 0.0);
    for cone in ["C", "C_pure", "C_rad"] {
        assert_eq!(r["certificates"][format!("cone {cone}")], 1.0);
    }
}

#[test]
fn shipped_block_fixture_triangulates_to_its_construction() {
    let path = fixture("three_block.json");
    for (kind, dims) in [("c0c1", vec![2, 4]), ("cccnc", vec![2, 4]), ("three", vec![2, 2, 2])] {
        let out = ncdomain(&["triangulate", kind, &path, "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stdout));
        let r = json_report(&out);
        let got: Vec<u64> = (0..dims.len())
            .map(|k| r["certificates"][format!("triangulation.block_dims[{k}]")].as_f64().unwrap() as u64)
            .collect();
        assert_eq!(got, dims, "{kind}");
    }
}

#[test]
fn wold_recovers_the_fixture_dimensions() {
    let out = ncdomain(&["wold", &fixture("three_block.json"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_report(&out);
    let dims: Vec<f64> = (0..3).map(|k| r["certificates"][format!("wold.dims[{k}]")].as_f64().unwrap()).collect();
    assert_eq!(dims, [2.0, 2.0, 2.0]);
}

#[test]
fn shipped_nilpotent_member_passes_analyze_model_and_kernel() {
    let path = fixture("pure_nilpotent.json");
    for cmd in ["analyze", "model", "kernel"] {
        let out = ncdomain(&[cmd, &path]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
    }
}

#[test]
fn non_member_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let big = MatrixTuple::new(vec![ncdomain::linalg::eye(2).scale(2.0)]).unwrap();
    let p = write_instance(&dir, "big.json", &Instance::new(FreeSymbol::linear(1), 1, big).unwrap());
    let out = ncdomain(&["analyze", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL domain s=1"));
}

#[test]
fn schema_errors_exit_2_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance::new(FreeSymbol::linear(1), 1, MatrixTuple::zeros(1, 1)).unwrap();
    let mut v: Value = serde_json::from_str(&emit_instance(&inst)).unwrap();
    v["tuple"]["colour"] = Value::from(1);
    let p = dir.path().join("bad.json");
    std::fs::write(&p, v.to_string()).unwrap();
    let out = ncdomain(&["analyze", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ncdomain(&["analyze", "/nonexistent/instance.json"]).status.code(), Some(2));
    assert_eq!(ncdomain(&["similar", "sideways", "x.json"]).status.code(), Some(2));
    assert_eq!(ncdomain(&["suite", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(ncdomain(&["suite", "--format", "yaml"]).status.code(), Some(2));
}

#[test]
fn gen_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = ncdomain(&["gen", "similar-pair", "--class", "cc", "--d", "3", "--seed", "5"]);
    let b = ncdomain(&["gen", "similar-pair", "--class", "cc", "--d", "3", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let p = dir.path().join("pair.json");
    let out = ncdomain(&["gen", "similar-pair", "--class", "cc", "--d", "3", "--seed", "5", "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&p).unwrap(), a.stdout.strip_suffix(b"\n").unwrap());
    let sim = ncdomain(&["similar", "isometric", p.to_str().unwrap()]);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stdout));
}

#[test]
fn reports_go_to_out_with_a_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    let out = ncdomain(&["model", &fixture("domain_member.json"), "--L", "4", "--format", "json", "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "PASS model L=4");
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(r["operation"], "model L=4");
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["margin"].as_f64().is_some()));
}
