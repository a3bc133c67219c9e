//! Benchmark problems, error measures, and convergence studies.
//!
//! Errors are measured either against a closed-form solution (the
//! unconstrained manufactured problem) or against a nested reference
//! solution two uniform refinements finer than the finest study mesh
//! (constrained problems, whose exact solutions are not available in
//! closed form). All meshes in a study are built as one refinement chain,
//! so coarse vertices are reference vertices and coarse functions prolong
//! exactly into the reference space.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{
    assemble_load, assemble_operator, assemble_stiffness_grad, energy_norm, recover_control,
    LinearOperator, Method, ProblemSpec,
};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::mesh::{unit_square_mesh, uniform_refine, Mesh};
use crate::space::{build_space, prolong, quadrature, FeSpace, QuadratureDomain, TriangleMap};
use crate::vi_solver::{solve_pdas_from, PdasParams, Solution, VIProblem};

// ---------------------------------------------------------------------------
// Exact solutions and benchmarks
// ---------------------------------------------------------------------------

/// Closed-form optimal solutions for error measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    /// Optimal state sin(πx)sin(πy) of the unconstrained problem with
    /// target (4π⁴β + 1) sin(πx) sin(πy); the optimal control is
    /// 2π² sin(πx) sin(πy).
    SinSinManufactured { beta: f64 },
}

impl ExactSolution {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            ExactSolution::SinSinManufactured { .. } => (PI * x).sin() * (PI * y).sin(),
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            ExactSolution::SinSinManufactured { .. } => [
                PI * (PI * x).cos() * (PI * y).sin(),
                PI * (PI * x).sin() * (PI * y).cos(),
            ],
        }
    }

    /// Hessian entries (∂xx, ∂xy, ∂yy).
    pub fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        match self {
            ExactSolution::SinSinManufactured { .. } => {
                let s = (PI * x).sin() * (PI * y).sin();
                let c = (PI * x).cos() * (PI * y).cos();
                [-PI * PI * s, PI * PI * c, -PI * PI * s]
            }
        }
    }

    pub fn bilaplacian(&self, x: f64, y: f64) -> f64 {
        match self {
            ExactSolution::SinSinManufactured { .. } => 4.0 * PI.powi(4) * self.value(x, y),
        }
    }

    pub fn control(&self, x: f64, y: f64) -> f64 {
        match self {
            ExactSolution::SinSinManufactured { .. } => 2.0 * PI * PI * self.value(x, y),
        }
    }

    /// Residual of the strong optimality equation β Δ²y + y − y_d at a
    /// point (zero for a consistent exact solution / target pair).
    pub fn strong_form_residual(&self, spec: &ProblemSpec, x: f64, y: f64) -> f64 {
        let ExactSolution::SinSinManufactured { beta } = *self;
        beta * self.bilaplacian(x, y) + self.value(x, y) - spec.y_d.eval(x, y)
    }
}

/// A named problem with its default refinement levels and solver settings.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub spec: ProblemSpec,
    /// Closed-form solution, when one exists (obstacle inactive).
    pub exact: Option<ExactSolution>,
    /// Default subdivision counts for studies.
    pub ns: Vec<usize>,
    pub pdas: PdasParams,
}

/// The unconstrained manufactured problem: the obstacle sits far above the
/// state, so the inequality solver must reproduce the plain equation.
pub fn manufactured_unconstrained() -> Benchmark {
    let beta = 0.1;
    Benchmark {
        name: "manufactured".into(),
        spec: ProblemSpec {
            beta,
            y_d: Field::ManufacturedRhs { beta },
            psi: Field::Constant { value: 1e6 },
            sigma: 10.0,
            method: Method::C0ip,
        },
        exact: Some(ExactSolution::SinSinManufactured { beta }),
        ns: vec![4, 8, 16, 32],
        pdas: PdasParams::default(),
    }
}

/// Benchmarks with genuinely active obstacles (no closed-form solution):
/// a flat cap far below an aggressive constant target, and a paraboloid
/// cap over a unit target.
pub fn constrained_benchmarks() -> Vec<Benchmark> {
    vec![
        Benchmark {
            name: "flat-cap".into(),
            spec: ProblemSpec {
                beta: 0.1,
                y_d: Field::Constant { value: 10.0 },
                psi: Field::Constant { value: 0.01 },
                sigma: 10.0,
                method: Method::C0ip,
            },
            exact: None,
            ns: vec![8, 16, 32],
            pdas: PdasParams::default(),
        },
        Benchmark {
            name: "paraboloid-cap".into(),
            spec: ProblemSpec {
                beta: 0.01,
                y_d: Field::Constant { value: 1.0 },
                psi: Field::Paraboloid {
                    base: 0.05,
                    curvature: 0.5,
                    center: [0.5, 0.5],
                },
                sigma: 10.0,
                method: Method::C0ip,
            },
            exact: None,
            ns: vec![8, 16, 32],
            pdas: PdasParams::default(),
        },
    ]
}

// ---------------------------------------------------------------------------
// Discretize and solve
// ---------------------------------------------------------------------------

/// One solved discretization of a problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: FeSpace,
    pub op: LinearOperator,
    pub load: Vec<f64>,
    pub constraints: Vec<(usize, f64)>,
    pub solution: Solution,
    /// Wall time of the inequality solve (excludes assembly).
    pub solve_seconds: f64,
}

/// Obstacle bounds at the interior vertices — the constrained DOFs of the
/// discrete inequality — ordered by vertex index.
pub fn vertex_constraints(space: &FeSpace, psi: &Field) -> Vec<(usize, f64)> {
    let nv = space.mesh.vertices.len();
    (0..nv)
        .filter_map(|v| {
            let d = space.dof_of_node[v];
            if d == crate::space::CONSTRAINED {
                None
            } else {
                let p = space.mesh.vertices[v];
                Some((d, psi.eval(p[0], p[1])))
            }
        })
        .collect()
}

/// Builds the space, operator, load, and vertex constraints on `mesh` and
/// runs the active-set solver.
pub fn solve_instance(spec: &ProblemSpec, mesh: Arc<Mesh>, pdas: PdasParams) -> Result<Instance> {
    solve_instance_from(spec, mesh, pdas, None)
}

/// [`solve_instance`] with an optional initial state for the active-set
/// iteration (a coarse solution prolonged to `mesh`).
pub fn solve_instance_from(
    spec: &ProblemSpec,
    mesh: Arc<Mesh>,
    pdas: PdasParams,
    initial: Option<&[f64]>,
) -> Result<Instance> {
    spec.validate(&mesh)?;
    let space = build_space(mesh, spec.method.degree())?;
    let op = assemble_operator(&space, spec)?;
    let load = assemble_load(&space, &spec.y_d)?;
    let constraints = vertex_constraints(&space, &spec.psi);
    let start = Instant::now();
    let solution = solve_pdas_from(
        &VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params: pdas,
        },
        initial,
    )?;
    let solve_seconds = start.elapsed().as_secs_f64();
    Ok(Instance {
        space,
        op,
        load,
        constraints,
        solution,
        solve_seconds,
    })
}

// ---------------------------------------------------------------------------
// Error measures
// ---------------------------------------------------------------------------

/// Error measures of one discretization.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSet {
    /// Discrete energy norm of the error (method-specific form).
    pub energy: f64,
    /// H¹ seminorm of the error.
    pub h1: f64,
    /// Max error over the row's interior vertices.
    pub vertex_linf: f64,
    /// L² state error (closed-form reference only).
    pub state_l2: Option<f64>,
    /// L² error of the recovered control (closed-form reference only).
    pub control_l2: Option<f64>,
}

/// What to measure errors against.
pub enum ErrorReference<'a> {
    /// A closed-form solution.
    Exact(&'a ExactSolution),
    /// A nested fine-mesh solution; `chain[0]` must live on the coarse
    /// instance's mesh and `chain.last()` on the reference instance's,
    /// with each space the uniform refinement of its predecessor.
    Fine {
        chain: &'a [FeSpace],
        reference: &'a Instance,
    },
}

/// L² error of a coefficient vector against a closed-form function,
/// degree-6 quadrature, summed in triangle order.
fn l2_error(space: &FeSpace, coeffs: &[f64], f: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Result<f64> {
    let rule = quadrature(QuadratureDomain::Triangle, 6)?;
    let per = space.nodes_per_tri();
    let terms: Vec<f64> = (0..space.mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let map = TriangleMap::new(&space.mesh, t);
            let dofs = space.local_dofs(t);
            let mut acc = 0.0;
            for q in 0..rule.len() {
                let [xi, eta] = rule.points[q];
                let basis = space.eval_basis_ref(&map, [1.0 - xi - eta, xi, eta]);
                let p = map.to_physical(xi, eta);
                let mut v = -f(p[0], p[1]);
                for k in 0..per {
                    if let Some(d) = dofs[k] {
                        v += coeffs[d] * basis.values[k];
                    }
                }
                acc += rule.weights[q] * map.det * v * v;
            }
            acc
        })
        .collect();
    Ok(terms.iter().sum::<f64>().max(0.0).sqrt())
}

/// H¹ seminorm error against a closed-form gradient.
fn h1_seminorm_error(
    space: &FeSpace,
    coeffs: &[f64],
    grad: &(dyn Fn(f64, f64) -> [f64; 2] + Sync),
) -> Result<f64> {
    let rule = quadrature(QuadratureDomain::Triangle, 6)?;
    let per = space.nodes_per_tri();
    let terms: Vec<f64> = (0..space.mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let map = TriangleMap::new(&space.mesh, t);
            let dofs = space.local_dofs(t);
            let mut acc = 0.0;
            for q in 0..rule.len() {
                let [xi, eta] = rule.points[q];
                let basis = space.eval_basis_ref(&map, [1.0 - xi - eta, xi, eta]);
                let p = map.to_physical(xi, eta);
                let g_exact = grad(p[0], p[1]);
                let mut gx = -g_exact[0];
                let mut gy = -g_exact[1];
                for k in 0..per {
                    if let Some(d) = dofs[k] {
                        gx += coeffs[d] * basis.gradients[k][0];
                        gy += coeffs[d] * basis.gradients[k][1];
                    }
                }
                acc += rule.weights[q] * map.det * (gx * gx + gy * gy);
            }
            acc
        })
        .collect();
    Ok(terms.iter().sum::<f64>().max(0.0).sqrt())
}

/// Interior-penalty energy norm of the error y_exact − y_h, evaluated by
/// quadrature on the broken form: element Hessian and mass terms, the two
/// consistency couplings, and the jump penalty (the exact solution's
/// normal derivative does not jump, so the error's jumps are those of y_h
/// with opposite sign).
fn c0ip_energy_error(
    space: &FeSpace,
    spec: &ProblemSpec,
    coeffs: &[f64],
    exact: &ExactSolution,
) -> Result<f64> {
    let vol_rule = quadrature(QuadratureDomain::Triangle, 6)?;
    let edge_rule = quadrature(QuadratureDomain::Interval, 5)?;
    let per = space.nodes_per_tri();
    let beta = spec.beta;
    let sigma = spec.sigma;

    let vol_terms: Vec<f64> = (0..space.mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let map = TriangleMap::new(&space.mesh, t);
            let dofs = space.local_dofs(t);
            let mut acc = 0.0;
            for q in 0..vol_rule.len() {
                let [xi, eta] = vol_rule.points[q];
                let basis = space.eval_basis_ref(&map, [1.0 - xi - eta, xi, eta]);
                let p = map.to_physical(xi, eta);
                let mut v = -exact.value(p[0], p[1]);
                let he = exact.hessian(p[0], p[1]);
                let mut h = [-he[0], -he[1], -he[2]];
                for k in 0..per {
                    if let Some(d) = dofs[k] {
                        v += coeffs[d] * basis.values[k];
                        for c in 0..3 {
                            h[c] += coeffs[d] * basis.hessians[k][c];
                        }
                    }
                }
                let frob = h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2];
                acc += vol_rule.weights[q] * map.det * (beta * frob + v * v);
            }
            acc
        })
        .collect();

    let interior_edges: Vec<usize> = (0..space.mesh.edges.len())
        .filter(|&e| space.mesh.edges[e].is_interior())
        .collect();
    let edge_terms: Vec<f64> = interior_edges
        .par_iter()
        .map(|&e| {
            let edge = &space.mesh.edges[e];
            let t0 = edge.triangles.0;
            let t1 = edge.triangles.1.expect("interior edge");
            let map0 = TriangleMap::new(&space.mesh, t0);
            let map1 = TriangleMap::new(&space.mesh, t1);
            let dofs0 = space.local_dofs(t0);
            let dofs1 = space.local_dofs(t1);
            let a = space.mesh.vertices[edge.vertices[0]];
            let b = space.mesh.vertices[edge.vertices[1]];
            let n = edge.normal;
            let mut acc = 0.0;
            for q in 0..edge_rule.len() {
                let t = edge_rule.point_1d(q);
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                // Error traces from both sides. The exact part is smooth,
                // so it cancels from the jump but not from the average.
                let side = |map: &TriangleMap, dofs: &[Option<usize>; 6]| -> (f64, f64) {
                    let [xi, eta] = map.to_reference(p);
                    let basis = space.eval_basis_ref(map, [1.0 - xi - eta, xi, eta]);
                    let mut dn = 0.0;
                    let mut d2n = 0.0;
                    for k in 0..per {
                        if let Some(d) = dofs[k] {
                            let g = basis.gradients[k];
                            let h = basis.hessians[k];
                            dn += coeffs[d] * (n[0] * g[0] + n[1] * g[1]);
                            d2n += coeffs[d]
                                * (n[0] * n[0] * h[0]
                                    + 2.0 * n[0] * n[1] * h[1]
                                    + n[1] * n[1] * h[2]);
                        }
                    }
                    (dn, d2n)
                };
                let (dn0, d2n0) = side(&map0, &dofs0);
                let (dn1, d2n1) = side(&map1, &dofs1);
                let ge = exact.gradient(p[0], p[1]);
                let he = exact.hessian(p[0], p[1]);
                let dn_exact = n[0] * ge[0] + n[1] * ge[1];
                let d2n_exact =
                    n[0] * n[0] * he[0] + 2.0 * n[0] * n[1] * he[1] + n[1] * n[1] * he[2];
                // Error traces: e = y_exact − y_h on each side.
                let jump = (dn_exact - dn0) - (dn_exact - dn1);
                let avg = 0.5 * ((d2n_exact - d2n0) + (d2n_exact - d2n1));
                let w = edge_rule.weights[q] * beta;
                acc += w * (sigma * jump * jump - 2.0 * edge.length * avg * jump);
            }
            acc
        })
        .collect();

    let total: f64 = vol_terms.iter().sum::<f64>() + edge_terms.iter().sum::<f64>();
    if total < -1e-10 {
        return Err(Error::NotCoercive { value: total });
    }
    Ok(total.max(0.0).sqrt())
}

/// Max error over the space's interior vertices (vertex coefficients are
/// nodal values for Lagrange elements).
fn vertex_linf_error(space: &FeSpace, coeffs: &[f64], f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let nv = space.mesh.vertices.len();
    let mut emax = 0.0_f64;
    for v in 0..nv {
        let d = space.dof_of_node[v];
        if d != crate::space::CONSTRAINED {
            let p = space.mesh.vertices[v];
            emax = emax.max((coeffs[d] - f(p[0], p[1])).abs());
        }
    }
    emax
}

/// Prolongs coefficients through a chain of nested spaces.
pub fn prolong_chain(chain: &[FeSpace], coeffs: &[f64]) -> Result<Vec<f64>> {
    let mut current = coeffs.to_vec();
    for w in chain.windows(2) {
        current = prolong(&w[0], &w[1], &current)?;
    }
    Ok(current)
}

/// Measures the errors of a solved instance against the reference.
pub fn compute_errors(
    benchmark: &Benchmark,
    coarse: &Instance,
    reference: &ErrorReference,
) -> Result<ErrorSet> {
    let spec = &benchmark.spec;
    let state = &coarse.solution.state;
    match reference {
        ErrorReference::Exact(exact) => {
            let value = |x: f64, y: f64| exact.value(x, y);
            let energy = match spec.method {
                Method::C0ip => c0ip_energy_error(&coarse.space, spec, state, exact)?,
                Method::Mixed => {
                    // Mixed energy: √(β‖u − u_h‖² + ‖y − y_h‖²) with the
                    // control recovered through the discrete Laplacian.
                    let u = recover_control(&coarse.space, state)?;
                    let eu = l2_error(&coarse.space, &u, &|x, y| exact.control(x, y))?;
                    let ey = l2_error(&coarse.space, state, &value)?;
                    (spec.beta * eu * eu + ey * ey).sqrt()
                }
            };
            let h1 = h1_seminorm_error(&coarse.space, state, &|x, y| exact.gradient(x, y))?;
            let vertex_linf = vertex_linf_error(&coarse.space, state, &value);
            let state_l2 = Some(l2_error(&coarse.space, state, &value)?);
            let u = recover_control(&coarse.space, state)?;
            let control_l2 = Some(l2_error(&coarse.space, &u, &|x, y| exact.control(x, y))?);
            Ok(ErrorSet {
                energy,
                h1,
                vertex_linf,
                state_l2,
                control_l2,
            })
        }
        ErrorReference::Fine { chain, reference } => {
            if chain.is_empty()
                || chain[0].mesh.triangles.len() != coarse.space.mesh.triangles.len()
                || chain.last().unwrap().mesh.triangles.len()
                    != reference.space.mesh.triangles.len()
            {
                return Err(Error::InvalidArgument(
                    "prolongation chain does not connect the instance to the reference".into(),
                ));
            }
            let fine_coeffs = prolong_chain(chain, state)?;
            let e: Vec<f64> = fine_coeffs
                .iter()
                .zip(&reference.solution.state)
                .map(|(a, b)| a - b)
                .collect();
            let energy = energy_norm(&reference.op, &e)?;
            let stiffness = assemble_stiffness_grad(&reference.space)?;
            let ke = stiffness.apply(&e);
            let h1 = e
                .iter()
                .zip(&ke)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .max(0.0)
                .sqrt();
            // Vertex errors compare the two solutions at the coarse mesh's
            // interior vertices, which are shared vertex ids in the chain.
            let nv = coarse.space.mesh.vertices.len();
            let mut vertex_linf = 0.0_f64;
            for v in 0..nv {
                let d = coarse.space.dof_of_node[v];
                let dr = reference.space.dof_of_node[v];
                if d != crate::space::CONSTRAINED && dr != crate::space::CONSTRAINED {
                    vertex_linf = vertex_linf
                        .max((coarse.solution.state[d] - reference.solution.state[dr]).abs());
                }
            }
            Ok(ErrorSet {
                energy,
                h1,
                vertex_linf,
                state_l2: None,
                control_l2: None,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------------

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_energy: f64,
    pub err_h1: f64,
    pub err_linf: f64,
    pub pdas_iters: usize,
    pub solve_seconds: f64,
    pub err_state_l2: Option<f64>,
    pub err_control_l2: Option<f64>,
}

/// A completed study: rows in the requested mesh order plus fitted rates.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub benchmark: String,
    pub method: Method,
    pub rows: Vec<StudyRow>,
    pub rate_energy: f64,
    pub rate_h1: f64,
    pub rate_linf: f64,
}

/// Least-squares slope of log(err) against log(h).
pub fn fit_rate(hs: &[f64], errs: &[f64]) -> f64 {
    assert_eq!(hs.len(), errs.len());
    if hs.len() < 2 {
        return 0.0;
    }
    let lx: Vec<f64> = hs.iter().map(|&h| h.max(1e-300).ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|&e| e.max(1e-300).ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Fitted rate over the last up-to-three rows of a study.
fn tail_rate(rows: &[StudyRow], pick: impl Fn(&StudyRow) -> f64) -> f64 {
    let k = rows.len().min(3);
    let tail = &rows[rows.len() - k..];
    let hs: Vec<f64> = tail.iter().map(|r| r.h).collect();
    let errs: Vec<f64> = tail.iter().map(&pick).collect();
    fit_rate(&hs, &errs)
}

/// Extra refinement levels between the finest study mesh and the nested
/// reference mesh used for constrained benchmarks (two levels: 4× finer).
const REFERENCE_EXTRA_LEVELS: usize = 2;

/// Runs a convergence study for the benchmark's problem data under the
/// given method on subdivision counts `ns`, which must be strictly
/// increasing with each count a power-of-two multiple of the first (the
/// meshes form one refinement chain). Levels are solved from coarse to
/// fine, each warm-started from the previous solution; rows are reported
/// in input order.
pub fn run_study(benchmark: &Benchmark, method: Method, ns: &[usize]) -> Result<StudyResult> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("study needs at least one mesh".into()));
    }
    let n0 = ns[0];
    if n0 < 2 {
        return Err(Error::InvalidArgument(
            "study meshes need interior vertices (n >= 2)".into(),
        ));
    }
    let mut levels = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        if i > 0 && n <= ns[i - 1] {
            return Err(Error::InvalidArgument(
                "subdivision counts must be strictly increasing".into(),
            ));
        }
        let ratio = n / n0;
        if n0 * ratio != n || !ratio.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "subdivision count {n} is not a power-of-two multiple of {n0}"
            )));
        }
        levels.push(ratio.trailing_zeros() as usize);
    }

    let mut spec = benchmark.spec.clone();
    spec.method = method;
    let needs_reference = benchmark.exact.is_none();
    let top_level = levels.last().unwrap()
        + if needs_reference {
            REFERENCE_EXTRA_LEVELS
        } else {
            0
        };

    // One refinement chain of meshes and spaces covering every level.
    let mut meshes: Vec<Arc<Mesh>> = vec![Arc::new(unit_square_mesh(n0)?)];
    for _ in 0..top_level {
        let next = uniform_refine(meshes.last().unwrap());
        meshes.push(Arc::new(next));
    }
    let spaces: Vec<FeSpace> = meshes
        .iter()
        .map(|m| build_space(Arc::clone(m), method.degree()))
        .collect::<Result<Vec<_>>>()?;

    // Solve from coarse to fine; each level's active-set iteration starts
    // from the previous level's solution prolonged up the chain, which
    // carries the converged active-set geometry to the finer mesh.
    let mut solve_levels = levels.clone();
    if needs_reference {
        solve_levels.push(top_level);
    }
    let mut instances: Vec<Instance> = Vec::with_capacity(solve_levels.len());
    let mut prev_level: Option<usize> = None;
    for &lvl in &solve_levels {
        let warm = match (prev_level, instances.last()) {
            (Some(from), Some(prev)) => Some(prolong_chain(
                &spaces[from..=lvl],
                &prev.solution.state,
            )?),
            _ => None,
        };
        let inst = solve_instance_from(
            &spec,
            Arc::clone(&meshes[lvl]),
            benchmark.pdas,
            warm.as_deref(),
        )?;
        instances.push(inst);
        prev_level = Some(lvl);
    }
    let reference_instance = if needs_reference {
        instances.pop()
    } else {
        None
    };

    let mut rows = Vec::with_capacity(ns.len());
    for (k, inst) in instances.iter().enumerate() {
        let lvl = levels[k];
        let errors = match (&benchmark.exact, &reference_instance) {
            (Some(exact), _) => compute_errors(
                &Benchmark {
                    spec: spec.clone(),
                    ..benchmark.clone()
                },
                inst,
                &ErrorReference::Exact(exact),
            )?,
            (None, Some(reference)) => compute_errors(
                &Benchmark {
                    spec: spec.clone(),
                    ..benchmark.clone()
                },
                inst,
                &ErrorReference::Fine {
                    chain: &spaces[lvl..=top_level],
                    reference,
                },
            )?,
            (None, None) => unreachable!("constrained study always has a reference"),
        };
        rows.push(StudyRow {
            n: ns[k],
            h: inst.space.mesh.h,
            ndof: inst.space.ndof,
            err_energy: errors.energy,
            err_h1: errors.h1,
            err_linf: errors.vertex_linf,
            pdas_iters: inst.solution.iterations,
            solve_seconds: inst.solve_seconds,
            err_state_l2: errors.state_l2,
            err_control_l2: errors.control_l2,
        });
    }

    Ok(StudyResult {
        benchmark: benchmark.name.clone(),
        method,
        rate_energy: tail_rate(&rows, |r| r.err_energy),
        rate_h1: tail_rate(&rows, |r| r.err_h1),
        rate_linf: tail_rate(&rows, |r| r.err_linf),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Active-set geometry helpers
// ---------------------------------------------------------------------------

/// Mesh vertex ids of the solution's active constraints.
pub fn active_vertex_ids(space: &FeSpace, solution: &Solution) -> Vec<usize> {
    let mut dof_to_vertex = std::collections::HashMap::new();
    for v in 0..space.mesh.vertices.len() {
        let d = space.dof_of_node[v];
        if d != crate::space::CONSTRAINED {
            dof_to_vertex.insert(d, v);
        }
    }
    solution
        .active_set
        .iter()
        .filter_map(|d| dof_to_vertex.get(d).copied())
        .collect()
}

/// Distance of a point to the unit square's boundary.
pub fn unit_square_boundary_distance(p: [f64; 2]) -> f64 {
    p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1])
}

/// Number of connected components of a vertex subset under mesh edge
/// adjacency.
pub fn count_vertex_components(mesh: &Mesh, vertices: &[usize]) -> usize {
    use std::collections::{HashMap, HashSet, VecDeque};
    let in_set: HashSet<usize> = vertices.iter().copied().collect();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &mesh.edges {
        let [a, b] = e.vertices;
        if in_set.contains(&a) && in_set.contains(&b) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
    }
    let mut seen: HashSet<usize> = HashSet::new();
    let mut components = 0;
    for &v in &in_set {
        if seen.contains(&v) {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([v]);
        seen.insert(v);
        while let Some(u) = queue.pop_front() {
            for &w in adj.get(&u).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
    }
    components
}
