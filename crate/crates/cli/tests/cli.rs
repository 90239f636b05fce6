//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn fjlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fjlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_fixture(dir: &Path) -> String {
    let path = dir.join("radical.json");
    let out = fjlab(&["scenario", "radical-user", "--out", path.to_str().unwrap()]);
    stdout_of(&out);
    path.to_str().unwrap().to_string()
}

#[test]
fn scenario_writes_fixture_and_reports_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("radical.json");
    let out = fjlab(&[
        "scenario",
        "radical-user",
        "--out",
        path.to_str().unwrap(),
    ]);
    let text = stdout_of(&out);
    assert!(text.contains("improvement"), "missing comparison summary: {text}");
    assert!(text.contains("opinion shift"), "missing shift report: {text}");

    let raw = std::fs::read_to_string(&path).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(doc["name"], "radical-user");
    assert_eq!(doc["rs_index"], 6);
    assert_eq!(doc["adjacency"].as_array().unwrap().len(), 7);
}

#[test]
fn simulate_writes_trajectory_json() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_fixture(dir.path());
    let traj = dir.path().join("traj.json");
    let out = fjlab(&[
        "simulate",
        "--scenario",
        &scenario,
        "--controller",
        "mb",
        "--steps",
        "30",
        "--horizon",
        "30",
        "--out",
        traj.to_str().unwrap(),
    ]);
    let text = stdout_of(&out);
    assert!(text.contains("cumulative cost"), "missing summary line: {text}");

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&traj).unwrap()).unwrap();
    assert_eq!(doc["controller"], "mb");
    assert_eq!(doc["steps"], 30);
    assert_eq!(doc["states"].as_array().unwrap().len(), 31);
    assert_eq!(doc["inputs"].as_array().unwrap().len(), 31);
    assert_eq!(doc["costs"].as_array().unwrap().len(), 31);
    assert!(doc["cumulative_cost"].as_f64().unwrap() > 0.0);
}

// At horizon 5 the bundled network cannot land exactly on the target, so the
// hard-terminal planner must refuse — and the soft-terminal mode must not.
#[test]
fn short_horizon_infeasible_exactly_but_fine_softly() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_fixture(dir.path());
    let exact = fjlab(&[
        "simulate", "--scenario", &scenario, "--controller", "mb",
        "--steps", "10", "--horizon", "5",
    ]);
    assert!(!exact.status.success());
    let err = String::from_utf8_lossy(&exact.stderr);
    assert!(err.contains("unreachable"), "unhelpful infeasibility error: {err}");

    let soft = fjlab(&[
        "simulate", "--scenario", &scenario, "--controller", "mb",
        "--steps", "10", "--horizon", "5", "--soft-terminal", "1e6",
    ]);
    stdout_of(&soft);
}

#[test]
fn batch_exports_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("batch.csv");
    let json = dir.path().join("batch.json");
    let out = fjlab(&[
        "batch",
        "--trials", "6",
        "--seed", "7",
        "--users", "5",
        "--steps", "10",
        "--horizon", "8",
        "--workers", "2",
        "--out", csv.to_str().unwrap(),
        "--json", json.to_str().unwrap(),
    ]);
    let text = stdout_of(&out);
    assert!(text.contains("median improvement"), "missing summary: {text}");

    let csv_text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(lines.len(), 7, "header plus six trials");
    assert!(lines[0].starts_with("trial_id,seed,n_users"));

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["records"].as_array().unwrap().len(), 6);
    assert_eq!(doc["summary"]["per_connectivity"].as_array().unwrap().len(), 4);
}

#[test]
fn bounds_prints_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_fixture(dir.path());
    let out = fjlab(&["bounds", "--scenario", &scenario]);
    let text = stdout_of(&out);
    assert!(text.contains("contraction margin"), "missing margin: {text}");
    assert!(text.lines().count() >= 8, "expected six user rows: {text}");
}

#[test]
fn equivalence_prints_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_fixture(dir.path());
    let out = fjlab(&["equivalence", "--scenario", &scenario]);
    let text = stdout_of(&out);
    assert!(text.contains("gap"), "missing gap line: {text}");
    assert!(text.contains("verdict"), "missing verdict: {text}");
}

#[test]
fn unknown_scenario_name_fails() {
    let out = fjlab(&["scenario", "echo-chamber"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown scenario"), "unhelpful error: {err}");
}

#[test]
fn missing_scenario_file_fails_with_context() {
    let out = fjlab(&["simulate", "--scenario", "/nonexistent/net.json"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("reading scenario"), "unhelpful error: {err}");
}
