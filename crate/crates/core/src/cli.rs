//! Configuration-file driven command line interface.
//!
//! The binary takes a single JSON configuration file and runs one of three
//! commands: `solve` (one mesh, optional visualization and summary
//! output), `study` (a convergence study over a refinement chain, with an
//! optional CSV table), or `export-mesh` (triangulation only). Exit codes:
//! 2 for configuration problems, 3 for solver failures, 4 for I/O errors.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{recover_control, Method, ProblemSpec};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::harness::{run_study, solve_instance, Benchmark, ExactSolution, Instance, StudyResult};
use crate::mesh::unit_square_mesh;
use crate::space::FeSpace;
use crate::vi_solver::PdasParams;

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Study,
    ExportMesh,
}

fn default_c() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-9
}

/// Active-set solver settings as configured.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdasConfig {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stationarity tolerance for accepting optimality.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for PdasConfig {
    fn default() -> Self {
        PdasConfig {
            c: default_c(),
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

impl PdasConfig {
    fn params(&self) -> PdasParams {
        PdasParams {
            c: self.c,
            max_iter: self.max_iter,
            kkt_tol: self.tol,
            // Inner linear solves run an order tighter than the
            // optimality tolerance, capped at a practical floor.
            cg_tol: (self.tol * 0.1).min(1e-10),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Visualization file (vertex fields for `solve`, mesh for
    /// `export-mesh`).
    #[serde(default)]
    pub vtk: Option<PathBuf>,
    /// JSON solve summary (also printed to stdout).
    #[serde(default)]
    pub summary: Option<PathBuf>,
    /// Study table in CSV form.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn default_sigma() -> f64 {
    10.0
}

/// Everything the binary reads: one command plus its data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub method: Option<Method>,
    /// Subdivision count (`solve`, `export-mesh`).
    #[serde(default)]
    pub n: Option<usize>,
    /// Subdivision counts (`study`).
    #[serde(default)]
    pub ns: Option<Vec<usize>>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub y_d: Option<Field>,
    #[serde(default)]
    pub psi: Option<Field>,
    #[serde(default)]
    pub pdas: PdasConfig,
    #[serde(default)]
    pub output: OutputPaths,
}

impl RunConfig {
    fn require<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
        v.clone()
            .ok_or_else(|| Error::Config(format!("missing required field '{name}'")))
    }

    fn problem(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec {
            beta: Self::require(&self.beta, "beta")?,
            y_d: Self::require(&self.y_d, "y_d")?,
            psi: Self::require(&self.psi, "psi")?,
            sigma: self.sigma,
            method: Self::require(&self.method, "method")?,
        })
    }

    /// Wraps the configured problem as a benchmark, attaching the
    /// closed-form solution when the data provably matches it: the target
    /// is the manufactured right-hand side at the same β and the obstacle
    /// is a constant at or above the state's maximum of one.
    fn benchmark(&self) -> Result<Benchmark> {
        let spec = self.problem()?;
        let exact = match (&spec.y_d, &spec.psi) {
            (Field::ManufacturedRhs { beta }, Field::Constant { value })
                if *beta == spec.beta && *value >= 1.0 =>
            {
                Some(ExactSolution::SinSinManufactured { beta: spec.beta })
            }
            _ => None,
        };
        Ok(Benchmark {
            name: "config".into(),
            spec,
            exact,
            ns: self.ns.clone().unwrap_or_default(),
            pdas: self.pdas.params(),
        })
    }
}

// ---------------------------------------------------------------------------
// Summaries and tables
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct KktSummary {
    feasibility: f64,
    multiplier_sign: f64,
    complementarity: f64,
    stationarity: f64,
}

/// Deterministic solve summary (no wall-clock fields, so repeated runs
/// produce identical bytes).
#[derive(Debug, Serialize)]
struct SolveSummary {
    command: &'static str,
    method: &'static str,
    n: usize,
    h: f64,
    ndof: usize,
    pdas_iterations: usize,
    active_count: usize,
    kkt: KktSummary,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::C0ip => "c0ip",
        Method::Mixed => "mixed",
    }
}

fn solve_summary(method: Method, n: usize, inst: &Instance) -> SolveSummary {
    SolveSummary {
        command: "solve",
        method: method_name(method),
        n,
        h: inst.space.mesh.h,
        ndof: inst.space.ndof,
        pdas_iterations: inst.solution.iterations,
        active_count: inst.solution.active_set.len(),
        kkt: KktSummary {
            feasibility: inst.solution.kkt.feasibility,
            multiplier_sign: inst.solution.kkt.multiplier_sign,
            complementarity: inst.solution.kkt.complementarity,
            stationarity: inst.solution.kkt.stationarity,
        },
    }
}

/// Per-vertex sample of a coefficient vector (zero on the boundary).
fn vertex_values(space: &FeSpace, coeffs: &[f64]) -> Vec<f64> {
    (0..space.mesh.vertices.len())
        .map(|v| {
            let d = space.dof_of_node[v];
            if d == crate::space::CONSTRAINED {
                0.0
            } else {
                coeffs[d]
            }
        })
        .collect()
}

/// CSV rendering of a study: fixed header, one row per mesh, and a
/// trailing comment with the fitted rates. Floats use 17 significant
/// digits so values round-trip exactly.
fn study_csv(result: &StudyResult) -> String {
    let mut out = String::from("h,ndof,err_energy,err_h1,err_linf,pdas_iters,solve_seconds\n");
    for row in &result.rows {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{},{:.16e}\n",
            row.h, row.ndof, row.err_energy, row.err_h1, row.err_linf, row.pdas_iters,
            row.solve_seconds
        ));
    }
    out.push_str(&format!(
        "# rate_energy={:.16e},rate_h1={:.16e},rate_linf={:.16e}\n",
        result.rate_energy, result.rate_h1, result.rate_linf
    ));
    out
}

fn print_study_table(result: &StudyResult) {
    println!(
        "study benchmark={} method={}",
        result.benchmark,
        method_name(result.method)
    );
    println!(
        "{:>10} {:>8} {:>13} {:>13} {:>13} {:>6} {:>9}",
        "h", "ndof", "err_energy", "err_h1", "err_linf", "iters", "seconds"
    );
    for row in &result.rows {
        println!(
            "{:>10.4e} {:>8} {:>13.6e} {:>13.6e} {:>13.6e} {:>6} {:>9.3}",
            row.h, row.ndof, row.err_energy, row.err_h1, row.err_linf, row.pdas_iters,
            row.solve_seconds
        );
    }
    println!(
        "rates: energy={:.3} h1={:.3} linf={:.3}",
        result.rate_energy, result.rate_h1, result.rate_linf
    );
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_solve(config: &RunConfig) -> Result<()> {
    let spec = config.problem()?;
    let n = RunConfig::require(&config.n, "n")?;
    if n < 2 {
        return Err(Error::Config(format!(
            "solve needs a mesh with interior vertices (n >= 2), got n={n}"
        )));
    }
    let mesh = Arc::new(unit_square_mesh(n)?);
    let inst = solve_instance(&spec, Arc::clone(&mesh), config.pdas.params())?;

    let summary = solve_summary(spec.method, n, &inst);
    let line = serde_json::to_string(&summary)?;
    println!("{line}");
    if let Some(path) = &config.output.summary {
        std::fs::write(path, format!("{line}\n"))?;
    }

    if let Some(path) = &config.output.vtk {
        let state = vertex_values(&inst.space, &inst.solution.state);
        let control_coeffs = recover_control(&inst.space, &inst.solution.state)?;
        let control = vertex_values(&inst.space, &control_coeffs);
        let multiplier = vertex_values(&inst.space, &inst.solution.multiplier);
        let obstacle: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|p| spec.psi.eval(p[0], p[1]))
            .collect();
        crate::vtk::write_point_data(
            path,
            &mesh,
            &[
                ("state", &state),
                ("control", &control),
                ("multiplier", &multiplier),
                ("obstacle", &obstacle),
            ],
        )?;
    }
    Ok(())
}

fn cmd_study(config: &RunConfig) -> Result<()> {
    let benchmark = config.benchmark()?;
    let ns = RunConfig::require(&config.ns, "ns")?;
    let method = benchmark.spec.method;
    let result = run_study(&benchmark, method, &ns)?;
    print_study_table(&result);
    if let Some(path) = &config.output.csv {
        std::fs::write(path, study_csv(&result))?;
    }
    Ok(())
}

fn cmd_export_mesh(config: &RunConfig) -> Result<()> {
    let n = RunConfig::require(&config.n, "n")?;
    let path = config
        .output
        .vtk
        .clone()
        .ok_or_else(|| Error::Config("export-mesh requires output.vtk".into()))?;
    let mesh = unit_square_mesh(n)?;
    crate::vtk::write_mesh(&path, &mesh)?;
    println!(
        "{}",
        serde_json::json!({
            "command": "export-mesh",
            "n": n,
            "vertices": mesh.vertices.len(),
            "triangles": mesh.triangles.len(),
        })
    );
    Ok(())
}

/// Loads the configuration file and runs its command.
pub fn run(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let config: RunConfig = serde_json::from_str(&text)?;
    match config.command {
        Command::Solve => cmd_solve(&config),
        Command::Study => cmd_study(&config),
        Command::ExportMesh => cmd_export_mesh(&config),
    }
}

/// Process exit code for an error: 2 configuration, 3 solver, 4 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> serde_json::Result<RunConfig> {
        serde_json::from_str(json)
    }

    #[test]
    fn config_parsing_and_defaults() {
        let config = parse(
            r#"{
                "command": "solve",
                "method": "c0ip",
                "n": 8,
                "beta": 0.1,
                "y_d": {"kind": "constant", "value": 10.0},
                "psi": {"kind": "constant", "value": 0.01}
            }"#,
        )
        .unwrap();
        assert_eq!(config.command, Command::Solve);
        assert_eq!(config.sigma, 10.0);
        assert_eq!(config.pdas.c, 1.0);
        assert_eq!(config.pdas.max_iter, 100);
        assert_eq!(config.pdas.tol, 1e-9);
        assert!(config.output.vtk.is_none());
        let spec = config.problem().unwrap();
        assert_eq!(spec.method, Method::C0ip);

        // Unknown top-level and nested keys are rejected.
        assert!(parse(r#"{"command": "solve", "unknown": 1}"#).is_err());
        assert!(parse(
            r#"{"command": "solve", "pdas": {"c": 1.0, "bogus": 2}}"#
        )
        .is_err());
        // Kebab-case command name.
        let exp = parse(r#"{"command": "export-mesh", "n": 4}"#).unwrap();
        assert_eq!(exp.command, Command::ExportMesh);
    }

    #[test]
    fn missing_fields_become_config_errors() {
        let config = parse(r#"{"command": "solve", "method": "c0ip", "n": 4}"#).unwrap();
        match config.problem() {
            Err(Error::Config(msg)) => assert!(msg.contains("beta")),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn exact_solution_attaches_only_to_matching_data() {
        let template = |y_d: &str, psi: &str, beta: f64| -> RunConfig {
            parse(&format!(
                r#"{{
                    "command": "study",
                    "method": "c0ip",
                    "ns": [4, 8],
                    "beta": {beta},
                    "y_d": {y_d},
                    "psi": {psi}
                }}"#
            ))
            .unwrap()
        };
        // Matching manufactured target and inactive obstacle: attached.
        let b = template(
            r#"{"kind": "manufactured_rhs", "beta": 0.1}"#,
            r#"{"kind": "constant", "value": 1000000.0}"#,
            0.1,
        )
        .benchmark()
        .unwrap();
        assert!(b.exact.is_some());
        // β mismatch between target and problem: not attached.
        let b = template(
            r#"{"kind": "manufactured_rhs", "beta": 0.2}"#,
            r#"{"kind": "constant", "value": 1000000.0}"#,
            0.1,
        )
        .benchmark()
        .unwrap();
        assert!(b.exact.is_none());
        // Obstacle low enough to clip the state: not attached.
        let b = template(
            r#"{"kind": "manufactured_rhs", "beta": 0.1}"#,
            r#"{"kind": "constant", "value": 0.5}"#,
            0.1,
        )
        .benchmark()
        .unwrap();
        assert!(b.exact.is_none());
        // Non-manufactured target: not attached.
        let b = template(
            r#"{"kind": "constant", "value": 1.0}"#,
            r#"{"kind": "constant", "value": 1000000.0}"#,
            0.1,
        )
        .benchmark()
        .unwrap();
        assert!(b.exact.is_none());
    }

    #[test]
    fn csv_rendering_is_stable() {
        use crate::harness::StudyRow;
        let result = StudyResult {
            benchmark: "config".into(),
            method: Method::C0ip,
            rows: vec![StudyRow {
                n: 4,
                h: 0.3535533905932738,
                ndof: 49,
                err_energy: 0.5,
                err_h1: 0.25,
                err_linf: 0.125,
                pdas_iters: 1,
                solve_seconds: 0.001,
                err_state_l2: None,
                err_control_l2: None,
            }],
            rate_energy: 1.0,
            rate_h1: 2.0,
            rate_linf: 2.0,
        };
        let csv = study_csv(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "h,ndof,err_energy,err_h1,err_linf,pdas_iters,solve_seconds"
        );
        assert_eq!(
            lines[1],
            "3.5355339059327379e-1,49,5.0000000000000000e-1,2.5000000000000000e-1,1.2500000000000000e-1,1,1.0000000000000000e-3"
        );
        assert!(lines[2].starts_with("# rate_energy="));
        // Round-trip: the printed h parses back to the same bits.
        let h_back: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(h_back, 0.3535533905932738);
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 2);
        let json_err: Error = serde_json::from_str::<RunConfig>("not json").unwrap_err().into();
        assert_eq!(exit_code(&json_err), 2);
        assert_eq!(
            exit_code(&Error::NoConvergence {
                iterations: 5,
                residual: 1.0
            }),
            3
        );
        assert_eq!(exit_code(&Error::NotSpd("x".into())), 3);
        assert_eq!(
            exit_code(&Error::ActiveSetStalled {
                iterations: 1,
                active: 0,
                stationarity: 1.0
            }),
            3
        );
        assert_eq!(exit_code(&Error::NotCoercive { value: -1.0 }), 3);
        assert_eq!(exit_code(&Error::SizeCap("x".into())), 3);
        let io_err: Error = std::io::Error::new(std::io::ErrorKind::NotFound, "x").into();
        assert_eq!(exit_code(&io_err), 4);
    }

    #[test]
    fn solve_command_writes_summary_and_fields() {
        let dir = tempfile::tempdir().unwrap();
        let summary_path = dir.path().join("summary.json");
        let vtk_path = dir.path().join("out.vtk");
        let config_path = dir.path().join("config.json");
        std::fs::write(
            &config_path,
            format!(
                r#"{{
                    "command": "solve",
                    "method": "mixed",
                    "n": 4,
                    "beta": 0.1,
                    "y_d": {{"kind": "constant", "value": 10.0}},
                    "psi": {{"kind": "constant", "value": 0.01}},
                    "output": {{
                        "summary": {},
                        "vtk": {}
                    }}
                }}"#,
                serde_json::json!(summary_path),
                serde_json::json!(vtk_path)
            ),
        )
        .unwrap();
        run(&config_path).unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
        assert_eq!(summary["command"], "solve");
        assert_eq!(summary["method"], "mixed");
        assert_eq!(summary["ndof"], 9);
        assert!(summary["active_count"].as_u64().unwrap() > 0);
        assert!(summary["kkt"]["stationarity"].as_f64().unwrap() <= 1e-9);
        let vtk = std::fs::read_to_string(&vtk_path).unwrap();
        for field in ["state", "control", "multiplier", "obstacle"] {
            assert!(vtk.contains(&format!("SCALARS {field} double 1")));
        }
    }
}
