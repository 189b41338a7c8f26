use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rmcst::sim::{generate_dataset, Design, SimulationScenario};

fn rmcst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmcst")).args(args).env("RUST_LOG", "off").output().expect("binary runs")
}

fn dataset(dir: &Path, n: usize) -> PathBuf {
    let sc = SimulationScenario { calibration_n: 50_000, ..SimulationScenario::main(1.0, 3) };
    let sim = generate_dataset(&Design::new(&sc).unwrap(), n, 3, 0);
    let path = dir.join("cohort.csv");
    sim.data.save(&path).unwrap();
    path
}

/// Rows of a CSV section, header included.
fn section(out: &str, name: &str) -> Vec<Vec<String>> {
    let tag = format!("# section: {name}");
    out.lines()
        .skip_while(|l| *l != tag)
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn estimate_reports_one_row_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 400);
    let out = rmcst(&["estimate", "--input", data.to_str().unwrap(), "--scheme", "ow,iptw,symtrim", "--L", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = section(&text, "results");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "scheme");
    assert_eq!(rows[3][0], "symtrim:0.1");
    assert!(!section(&text, "balance").is_empty());
}

#[test]
fn out_of_range_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 100);
    let out =
        rmcst(&["estimate", "--input", data.to_str().unwrap(), "--scheme", "symtrim", "--alpha", "0.7", "--L", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let out = rmcst(&["estimate", "--input", "/nonexistent/cohort.csv", "--L", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cohort.csv"));
}

#[test]
fn bootstrap_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 300);
    let args = [
        "estimate",
        "--input",
        data.to_str().unwrap(),
        "--scheme",
        "ow,iptw",
        "--L",
        "2,5",
        "--variance",
        "bootstrap",
        "--B",
        "50",
        "--seed",
        "11",
    ];
    let (a, b) = (rmcst(&args), rmcst(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = rmcst(&[&args[..], &["--threads", "2"]].concat());
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn small_budget_is_flagged() {
    let out = rmcst(&["reproduce", "--table", "4", "--gamma", "1", "--reps", "3", "--n", "200", "--super-n", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# warning: BudgetTooSmall: reps")));
    assert!(text.lines().any(|l| l.starts_with("# warning: BudgetTooSmall: super_n")));
}

#[test]
fn iptw_relative_efficiency_is_one() {
    let out = rmcst(&["reproduce", "--table", "3", "--gamma", "3", "--reps", "4", "--n", "200", "--super-n", "20000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = section(&text, "table3");
    let value = rows[0].iter().position(|c| c == "value").unwrap();
    let iptw: Vec<_> = rows.iter().filter(|r| r[0] == "iptw").collect();
    assert_eq!(iptw.len(), 9);
    assert!(iptw.iter().all(|r| r[value] == "1.00"));
}

#[test]
fn json_output_goes_to_the_requested_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("truth.json");
    let out = rmcst(&[
        "truth",
        "--gamma",
        "1",
        "--super-n",
        "5000",
        "--scheme",
        "ow",
        "--format",
        "json",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["command"], "truth");
    let truth = v["sections"].as_array().unwrap().iter().find(|s| s["name"] == "truth").unwrap();
    assert_eq!(truth["rows"].as_array().unwrap().len(), 3);
}
