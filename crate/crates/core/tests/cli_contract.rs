//! End-to-end contract of the command-line binary: exit codes, output
//! files, and the shape of what it writes.

use std::path::Path;
use std::process::{Command, Output};

fn run(config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plate-vi"))
        .arg(config)
        .output()
        .expect("solver binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_plate-vi"))
        .output()
        .expect("solver binary runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&dir.path().join("nope.json"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_config_exits_with_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("out.vtk");
    let config = write_config(
        dir.path(),
        "bad.json",
        &format!(
            r#"{{"command": "solve", "method": "c0ip", "n": 8, "beta": 0.1,
                "y_d": {{"kind": "constant", "value": 1.0}},
                "psi": {{"kind": "constant", "value": 1.0}},
                "surprise_key": true,
                "output": {{"vtk": {:?}}}}}"#,
            vtk.to_string_lossy()
        ),
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(2));
    assert!(!vtk.exists(), "failed run must not leave output files");
}

#[test]
fn missing_required_field_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "nofield.json",
        r#"{"command": "solve", "method": "c0ip", "n": 8,
            "y_d": {"kind": "constant", "value": 1.0},
            "psi": {"kind": "constant", "value": 1.0}}"#,
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn invalid_problem_data_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "negbeta.json",
        r#"{"command": "solve", "method": "c0ip", "n": 8, "beta": -1.0,
            "y_d": {"kind": "constant", "value": 1.0},
            "psi": {"kind": "constant", "value": 1.0}}"#,
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_reports_an_empty_active_set_for_a_huge_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("s.json");
    let config = write_config(
        dir.path(),
        "huge.json",
        &format!(
            r#"{{"command": "solve", "method": "c0ip", "n": 16, "beta": 0.1,
                "y_d": {{"kind": "manufactured_rhs", "beta": 0.1}},
                "psi": {{"kind": "constant", "value": 1000000.0}},
                "output": {{"summary": {:?}}}}}"#,
            summary.to_string_lossy()
        ),
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(parsed["active_count"], 0);
    assert_eq!(parsed["command"], "solve");
    assert_eq!(parsed["ndof"], 961);
    // The one-line summary also lands on stdout.
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("\"active_count\":0"));
}

#[test]
fn solve_with_contact_reports_active_vertices_and_writes_fields() {
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("c.vtk");
    let summary = dir.path().join("c.json");
    let config = write_config(
        dir.path(),
        "contact.json",
        &format!(
            r#"{{"command": "solve", "method": "c0ip", "n": 8, "beta": 0.1,
                "y_d": {{"kind": "constant", "value": 10.0}},
                "psi": {{"kind": "constant", "value": 0.01}},
                "output": {{"vtk": {:?}, "summary": {:?}}}}}"#,
            vtk.to_string_lossy(),
            summary.to_string_lossy()
        ),
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert!(parsed["active_count"].as_u64().unwrap() > 0);
    assert!(parsed["kkt"]["stationarity"].as_f64().unwrap() <= 1e-9);
    let text = std::fs::read_to_string(&vtk).unwrap();
    for field in ["state", "control", "multiplier", "obstacle"] {
        assert!(text.contains(&format!("SCALARS {field} double 1")));
    }
}

#[test]
fn study_writes_one_row_per_mesh_plus_the_rate_trailer() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("study.csv");
    let config = write_config(
        dir.path(),
        "study.json",
        &format!(
            r#"{{"command": "study", "method": "mixed", "ns": [2, 4, 8], "beta": 0.1,
                "y_d": {{"kind": "manufactured_rhs", "beta": 0.1}},
                "psi": {{"kind": "constant", "value": 1000000.0}},
                "output": {{"csv": {:?}}}}}"#,
            csv.to_string_lossy()
        ),
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "h,ndof,err_energy,err_h1,err_linf,pdas_iters,solve_seconds");
    assert!(lines[4].starts_with("# rate_energy="));
    // Rates also land on stdout as a table.
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rates:"));
}

#[test]
fn export_mesh_requires_an_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "nopath.json",
        r#"{"command": "export-mesh", "n": 4}"#,
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(2));

    let vtk = dir.path().join("mesh.vtk");
    let config = write_config(
        dir.path(),
        "mesh.json",
        &format!(
            r#"{{"command": "export-mesh", "n": 4, "output": {{"vtk": {:?}}}}}"#,
            vtk.to_string_lossy()
        ),
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&vtk).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0"));
    assert!(text.contains("POINTS 25 double"));
}

#[test]
fn solver_failure_exits_with_the_solver_code() {
    // max_iter 1 cannot reach a fixed point on a benchmark with contact.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "stall.json",
        r#"{"command": "solve", "method": "c0ip", "n": 8, "beta": 0.1,
            "y_d": {"kind": "constant", "value": 10.0},
            "psi": {"kind": "constant", "value": 0.01},
            "pdas": {"max_iter": 1}}"#,
    );
    let out = run(&config);
    assert_eq!(out.status.code(), Some(3));
}
