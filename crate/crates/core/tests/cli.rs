use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn circuit(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("circuits")
        .join(name)
}

fn ctcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctcsim"))
        .args(args)
        .env_remove("CTCSIM_DEFAULT_TOL")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn demos_pass() {
    for args in [
        &["demo", "clone-pure", "--index", "1"][..],
        &["demo", "clone-mixed", "--probs", "0.25,0.75"],
        &["demo", "nosignal"],
        &["demo", "nosignal", "--cloner", "pure"],
    ] {
        let out = ctcsim(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
        let report = json(&out);
        assert_eq!(report["format_version"], 1);
        assert_eq!(report["pass"], true);
        assert!(stderr(&out).lines().all(|l| l.starts_with("PASS")));
    }
}

#[test]
fn clone_pure_reads_state_files() {
    let alphabet = format!("@{}", circuit("zero_plus.states").display());
    let out = ctcsim(&[
        "demo",
        "clone-pure",
        "--alphabet",
        &alphabet,
        "--index",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = ctcsim(&["demo", "clone-pure", "--index", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_reports_fixed_point_and_marginals() {
    let path = circuit("zero_plus_cloner.ctc");
    let out = ctcsim(&[
        "run",
        path.to_str().unwrap(),
        "--trace-out",
        "B",
        "--trace-out",
        "A",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["command"], "run");
    assert_eq!(r["fixed_point"]["multiplicity"], 1);
    assert!(r["fixed_point"]["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["output"]["rows"], 4);
    assert_eq!(r["marginals"].as_array().unwrap().len(), 2);
    for key in ["marginal[A]_vs_input", "output_vs_input"] {
        assert!(r["fidelities"][key].is_number(), "{key}");
    }
    let names: Vec<&str> = r["layout"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["A", "B", "CTC"]);
}

#[test]
fn exit_codes() {
    let swap = circuit("swap.ctc");
    let swap = swap.to_str().unwrap();
    assert_eq!(
        ctcsim(&["demo", "clone-mixed", "--probs", "0.5,0.6"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ctcsim(&["demo", "clone-mixed"]).status.code(), Some(1));
    assert_eq!(
        ctcsim(&["run", "/nonexistent/x.ctc"]).status.code(),
        Some(3)
    );
    assert_eq!(ctcsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ctcsim(&["--help"]).status.code(), Some(0));
    assert_eq!(
        ctcsim(&["run", swap, "--trace-out", "CTC"]).status.code(),
        Some(1)
    );
    assert_eq!(ctcsim(&["run", swap, "--tol", "-1"]).status.code(), Some(1));
    let stuck = ctcsim(&["run", swap, "--solver", "cesaro", "--max-iter", "1"]);
    assert_eq!(stuck.status.code(), Some(2), "{}", stderr(&stuck));
    assert_eq!(
        ctcsim(&["sweep", "fixed-points", "--dim", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn parse_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ctc");
    std::fs::write(
        &path,
        "system A 2\nsystem CTC 2\ninput pure A : 1 zz\ngate bogus A\n",
    )
    .unwrap();
    let out = ctcsim(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains(":3:18:"), "{err}");
    assert!(err.contains(":4:"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn output_is_deterministic() {
    let args = ["sweep", "fixed-points", "--trials", "20", "--seed", "42"];
    let (a, b) = (ctcsim(&args), ctcsim(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = ctcsim(&["sweep", "fixed-points", "--trials", "20", "--seed", "43"]);
    assert_ne!(a.stdout, other.stdout);
    let demo = ["demo", "nosignal"];
    assert_eq!(ctcsim(&demo).stdout, ctcsim(&demo).stdout);
}

#[test]
fn out_flag_writes_file_only() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let out = ctcsim(&[
        "demo",
        "clone-mixed",
        "--probs",
        "0.25,0.75",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(r["demo"], "clone-mixed");
    let denied = ctcsim(&["demo", "nosignal", "--out", "/nonexistent/dir/r.json"]);
    assert_eq!(denied.status.code(), Some(3));
}

#[test]
fn csv_output() {
    let out = ctcsim(&[
        "sweep",
        "no-cloning-baseline",
        "--trials",
        "5",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,seed,worst_infidelity,ok");
    assert_eq!(lines.len(), 7);
    assert!(lines[6].starts_with("worst,,"));
    let out = ctcsim(&["demo", "nosignal", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l == "pass,true"));
}

#[test]
fn default_tolerance_comes_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_ctcsim"))
        .args(["run", circuit("swap.ctc").to_str().unwrap()])
        .env("CTCSIM_DEFAULT_TOL", "1e-9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["solver_options"]["tol_residual"], 1e-9);
    let flag = Command::new(env!("CARGO_BIN_EXE_ctcsim"))
        .args([
            "run",
            circuit("swap.ctc").to_str().unwrap(),
            "--tol",
            "1e-11",
        ])
        .env("CTCSIM_DEFAULT_TOL", "1e-9")
        .output()
        .unwrap();
    assert_eq!(json(&flag)["solver_options"]["tol_residual"], 1e-11);
}
