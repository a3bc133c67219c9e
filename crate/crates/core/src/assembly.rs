//! Assembly of the discrete bilinear forms.
//!
//! Two discretizations of the energy inner product
//! a(y, z) = β (D²y, D²z) + (y, z) are provided:
//!
//! * **C0 interior penalty** on degree-2 Lagrange elements: element-wise
//!   Hessian products plus edge terms on interior edges — consistency
//!   couplings between the mean second normal derivative and the jump of
//!   the first normal derivative, and a σ/|e|-weighted jump penalty. With
//!   this crate's edge convention (normal out of the lower-indexed
//!   triangle, jump = first trace minus second trace) the consistency
//!   terms carry a negative sign; that choice is pinned down by the
//!   quadratic-reproduction identity tested below and by the observed
//!   convergence orders.
//! * **Mixed** on degree-1 elements: the operator M + β K M⁻¹ K applied
//!   matrix-free, where M is the mass matrix, K the gradient stiffness
//!   matrix, and M⁻¹ is realized by an inner conjugate-gradient solve.
//!
//! Local element and edge matrices are computed in parallel but always
//! accumulated in a fixed order, so assembled values are bitwise
//! reproducible regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::mesh::Mesh;
use crate::space::{
    quadrature, FeSpace, QuadratureDomain, QuadratureRule, TriangleMap,
};

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// Discretization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Degree-2 C0 interior penalty.
    C0ip,
    /// Degree-1 mixed formulation.
    Mixed,
}

impl Method {
    /// Polynomial degree of the state space for this method.
    pub fn degree(self) -> usize {
        match self {
            Method::C0ip => 2,
            Method::Mixed => 1,
        }
    }
}

fn default_sigma() -> f64 {
    10.0
}

/// Continuous problem data: minimize ½‖y − y_d‖² + (β/2)‖Δy‖² subject to
/// y ≤ ψ, with y = 0 on the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Control cost weight β > 0.
    pub beta: f64,
    /// Target state y_d.
    pub y_d: Field,
    /// Obstacle ψ (upper bound on the state).
    pub psi: Field,
    /// Interior penalty parameter σ (C0 interior penalty only).
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Discretization family.
    pub method: Method,
}

impl ProblemSpec {
    /// Checks parameter positivity and boundary compatibility: the zero
    /// boundary values of the state must lie strictly below the obstacle,
    /// so ψ is sampled at boundary vertices and boundary-edge quadrature
    /// points.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if self.method == Method::C0ip && (!(self.sigma > 0.0) || !self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        let rule = quadrature(QuadratureDomain::Interval, 4)?;
        let boundary = mesh.boundary_vertices();
        for (v, &on) in boundary.iter().enumerate() {
            if on && self.psi.eval(mesh.vertices[v][0], mesh.vertices[v][1]) <= 0.0 {
                return Err(Error::Config(format!(
                    "obstacle is not positive at boundary vertex ({}, {})",
                    mesh.vertices[v][0], mesh.vertices[v][1]
                )));
            }
        }
        for edge in mesh.edges.iter().filter(|e| e.boundary) {
            let a = mesh.vertices[edge.vertices[0]];
            let b = mesh.vertices[edge.vertices[1]];
            for q in 0..rule.len() {
                let t = rule.point_1d(q);
                let x = a[0] + t * (b[0] - a[0]);
                let y = a[1] + t * (b[1] - a[1]);
                if self.psi.eval(x, y) <= 0.0 {
                    return Err(Error::Config(format!(
                        "obstacle is not positive on the boundary near ({x}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sparse symmetric matrices
// ---------------------------------------------------------------------------

/// Symmetric sparse matrix storing the upper triangle (i ≤ j) in CSR form.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from (row, col, value) triplets; entries are mirrored into
    /// the upper triangle and duplicates are summed left to right after a
    /// stable sort, so the result depends only on the triplet order, never
    /// on threading.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
            .collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored (upper-triangle) entries in row-major order.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    /// y = A x (both triangles, via symmetry).
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for i in 0..self.dim {
            let xi = x[i];
            let mut yi = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.values[k];
                yi += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += yi;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (i, j, v) in self.upper_entries() {
            if i == j {
                d[i] = v;
            }
        }
        d
    }

    /// Returns the matrix with the given rows and columns symmetrically
    /// eliminated: entries touching a fixed index are dropped and fixed
    /// diagonal entries are set to one.
    pub fn eliminate(&self, fixed: &[bool]) -> SparseSymMatrix {
        let mut triplets = Vec::with_capacity(self.values.len());
        for (i, j, v) in self.upper_entries() {
            if !fixed[i] && !fixed[j] {
                triplets.push((i, j, v));
            }
        }
        for (i, &f) in fixed.iter().enumerate() {
            if f {
                triplets.push((i, i, 1.0));
            }
        }
        SparseSymMatrix::from_triplets(self.dim, &triplets)
    }

    /// Dense copy (both triangles); intended for small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dim]; self.dim];
        for (i, j, v) in self.upper_entries() {
            a[i][j] = v;
            if i != j {
                a[j][i] = v;
            }
        }
        a
    }
}

// ---------------------------------------------------------------------------
// Linear operators
// ---------------------------------------------------------------------------

/// The mixed-method energy operator M + β K M⁻¹ K, applied matrix-free.
#[derive(Debug, Clone)]
pub struct MixedOperator {
    pub mass: SparseSymMatrix,
    pub stiffness: SparseSymMatrix,
    pub beta: f64,
    /// Relative tolerance of the inner mass solve.
    pub inner_tol: f64,
}

impl MixedOperator {
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// Solves M z = rhs by Jacobi-preconditioned conjugate gradients. The
    /// mass matrix is uniformly well conditioned, so this converges in a
    /// few dozen iterations; the loop is sequential and deterministic.
    fn mass_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return vec![0.0; n];
        }
        let dinv: Vec<f64> = self.mass.diagonal().iter().map(|&d| 1.0 / d).collect();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for _ in 0..10 * n.max(1) {
            self.mass.apply_into(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= self.inner_tol * bnorm {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * dinv[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let kx = self.stiffness.apply(x);
        let z = self.mass_solve(&kx);
        let kz = self.stiffness.apply(&z);
        self.mass.apply_into(x, out);
        for i in 0..out.len() {
            out[i] += self.beta * kz[i];
        }
    }

    /// Exact diagonal of M + β K D_M⁻¹ K (mass-lumped inner inverse); used
    /// as a preconditioner for the outer solves.
    pub fn precond_diagonal(&self) -> Vec<f64> {
        let dm = self.mass.diagonal();
        let mut d = dm.clone();
        for (i, j, v) in self.stiffness.upper_entries() {
            d[i] += self.beta * v * v / dm[j];
            if i != j {
                d[j] += self.beta * v * v / dm[i];
            }
        }
        d
    }
}

/// A symmetric positive definite operator: either an explicitly assembled
/// sparse matrix or the matrix-free mixed composition.
#[derive(Debug, Clone)]
pub enum LinearOperator {
    Explicit(SparseSymMatrix),
    Composite(MixedOperator),
}

impl LinearOperator {
    pub fn dim(&self) -> usize {
        match self {
            LinearOperator::Explicit(m) => m.dim(),
            LinearOperator::Composite(op) => op.dim(),
        }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LinearOperator::Explicit(m) => m.apply_into(x, out),
            LinearOperator::Composite(op) => op.apply_into(x, out),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// Diagonal (exact for explicit matrices, a spectrally equivalent
    /// estimate for the composite), for Jacobi preconditioning.
    pub fn precond_diagonal(&self) -> Vec<f64> {
        match self {
            LinearOperator::Explicit(m) => m.diagonal(),
            LinearOperator::Composite(op) => op.precond_diagonal(),
        }
    }

    pub fn as_explicit(&self) -> Option<&SparseSymMatrix> {
        match self {
            LinearOperator::Explicit(m) => Some(m),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Element assembly
// ---------------------------------------------------------------------------

/// Scatters a dense local matrix (upper part per index pair) into triplets.
fn scatter_local(
    triplets: &mut Vec<(usize, usize, f64)>,
    dofs: &[Option<usize>],
    local: &[f64],
    n: usize,
) {
    for a in 0..n {
        let Some(i) = dofs[a] else { continue };
        for b in a..n {
            let Some(j) = dofs[b] else { continue };
            triplets.push((i, j, local[a * n + b]));
        }
    }
}

/// Mass matrix (∫ u v) on the space's free DOFs, degree-4 quadrature.
pub fn assemble_mass(space: &FeSpace) -> Result<SparseSymMatrix> {
    let rule = quadrature(QuadratureDomain::Triangle, 4)?;
    assemble_volume(space, move |basis, _| {
        let mut local = [[0.0; 6]; 6];
        for a in 0..basis.count {
            for b in a..basis.count {
                local[a][b] = basis.values[a] * basis.values[b];
            }
        }
        local
    }, &rule)
}

/// Gradient stiffness matrix (∫ ∇u·∇v) on the space's free DOFs.
pub fn assemble_stiffness_grad(space: &FeSpace) -> Result<SparseSymMatrix> {
    let rule = quadrature(QuadratureDomain::Triangle, 2)?;
    assemble_volume(space, move |basis, _| {
        let mut local = [[0.0; 6]; 6];
        for a in 0..basis.count {
            for b in a..basis.count {
                local[a][b] = basis.gradients[a][0] * basis.gradients[b][0]
                    + basis.gradients[a][1] * basis.gradients[b][1];
            }
        }
        local
    }, &rule)
}

/// Shared volume-assembly driver: integrates `kernel` (symmetric local
/// integrand per quadrature point) over every triangle in parallel, then
/// accumulates triplets in triangle order.
fn assemble_volume(
    space: &FeSpace,
    kernel: impl Fn(&crate::space::BasisEval, [f64; 2]) -> [[f64; 6]; 6] + Sync,
    rule: &QuadratureRule,
) -> Result<SparseSymMatrix> {
    let ntri = space.mesh.triangles.len();
    let per = space.nodes_per_tri();
    let locals: Vec<([Option<usize>; 6], [f64; 36])> = (0..ntri)
        .into_par_iter()
        .map(|t| {
            let map = TriangleMap::new(&space.mesh, t);
            let mut local = [0.0; 36];
            for q in 0..rule.len() {
                let [xi, eta] = rule.points[q];
                let lam = [1.0 - xi - eta, xi, eta];
                let basis = space.eval_basis_ref(&map, lam);
                let x = map.to_physical(xi, eta);
                let k = kernel(&basis, x);
                let w = rule.weights[q] * map.det;
                for a in 0..per {
                    for b in a..per {
                        local[a * per + b] += w * k[a][b];
                    }
                }
            }
            (space.local_dofs(t), local)
        })
        .collect();

    let mut triplets = Vec::new();
    for (dofs, local) in &locals {
        scatter_local(&mut triplets, dofs, local, per);
    }
    Ok(SparseSymMatrix::from_triplets(space.ndof, &triplets))
}

/// Load vector ∫ f φ_i with degree-4 quadrature.
pub fn assemble_load_fn(space: &FeSpace, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Vec<f64>> {
    let rule = quadrature(QuadratureDomain::Triangle, 4)?;
    let ntri = space.mesh.triangles.len();
    let per = space.nodes_per_tri();
    let locals: Vec<([Option<usize>; 6], [f64; 6])> = (0..ntri)
        .into_par_iter()
        .map(|t| {
            let map = TriangleMap::new(&space.mesh, t);
            let mut local = [0.0; 6];
            for q in 0..rule.len() {
                let [xi, eta] = rule.points[q];
                let lam = [1.0 - xi - eta, xi, eta];
                let basis = space.eval_basis_ref(&map, lam);
                let x = map.to_physical(xi, eta);
                let w = rule.weights[q] * map.det * f(x[0], x[1]);
                for a in 0..per {
                    local[a] += w * basis.values[a];
                }
            }
            (space.local_dofs(t), local)
        })
        .collect();

    let mut b = vec![0.0; space.ndof];
    for (dofs, local) in &locals {
        for a in 0..per {
            if let Some(i) = dofs[a] {
                b[i] += local[a];
            }
        }
    }
    Ok(b)
}

/// Load vector for a configured target-state field.
pub fn assemble_load(space: &FeSpace, y_d: &Field) -> Result<Vec<f64>> {
    assemble_load_fn(space, |x, y| y_d.eval(x, y))
}

/// Assembles the C0 interior penalty form
/// β [Σ_T (D²u, D²v)_T − Σ_e ({∂²u/∂n²}, [∂v/∂n])_e − Σ_e ([∂u/∂n], {∂²v/∂n²})_e
///   + σ Σ_e |e|⁻¹ ([∂u/∂n], [∂v/∂n])_e] + (u, v)
/// on a degree-2 space; edge sums run over interior edges only.
pub fn assemble_c0ip(space: &FeSpace, spec: &ProblemSpec) -> Result<SparseSymMatrix> {
    if space.degree != 2 {
        return Err(Error::InvalidArgument(format!(
            "interior penalty form requires a degree-2 space, got degree {}",
            space.degree
        )));
    }
    let beta = spec.beta;
    let sigma = spec.sigma;
    let hess_rule = quadrature(QuadratureDomain::Triangle, 2)?;
    let mass_rule = quadrature(QuadratureDomain::Triangle, 4)?;
    let edge_rule = quadrature(QuadratureDomain::Interval, 4)?;
    let ntri = space.mesh.triangles.len();
    let per = space.nodes_per_tri();

    // Volume terms: β Hessian product + mass.
    let volume_locals: Vec<([Option<usize>; 6], [f64; 36])> = (0..ntri)
        .into_par_iter()
        .map(|t| {
            let map = TriangleMap::new(&space.mesh, t);
            let mut local = [0.0; 36];
            for q in 0..hess_rule.len() {
                let [xi, eta] = hess_rule.points[q];
                let basis = space.eval_basis_ref(&map, [1.0 - xi - eta, xi, eta]);
                let w = beta * hess_rule.weights[q] * map.det;
                for a in 0..per {
                    let ha = basis.hessians[a];
                    for b in a..per {
                        let hb = basis.hessians[b];
                        // Frobenius product of symmetric 2×2 Hessians.
                        let frob = ha[0] * hb[0] + 2.0 * ha[1] * hb[1] + ha[2] * hb[2];
                        local[a * per + b] += w * frob;
                    }
                }
            }
            for q in 0..mass_rule.len() {
                let [xi, eta] = mass_rule.points[q];
                let basis = space.eval_basis_ref(&map, [1.0 - xi - eta, xi, eta]);
                let w = mass_rule.weights[q] * map.det;
                for a in 0..per {
                    for b in a..per {
                        local[a * per + b] += w * basis.values[a] * basis.values[b];
                    }
                }
            }
            (space.local_dofs(t), local)
        })
        .collect();

    // Interior edge terms over the union of the two adjacent triangles'
    // nodes (deterministic union order: first triangle's nodes, then the
    // second's new ones).
    let interior_edges: Vec<usize> = (0..space.mesh.edges.len())
        .filter(|&e| space.mesh.edges[e].is_interior())
        .collect();
    let edge_locals: Vec<(Vec<Option<usize>>, Vec<f64>)> = interior_edges
        .par_iter()
        .map(|&e| {
            let edge = &space.mesh.edges[e];
            let t0 = edge.triangles.0;
            let t1 = edge.triangles.1.expect("interior edge has two triangles");
            let nodes0 = space.local_nodes(t0);
            let nodes1 = space.local_nodes(t1);
            let mut union_nodes: Vec<usize> = nodes0[..per].to_vec();
            let mut pos1 = [0usize; 6];
            for (k, &n) in nodes1[..per].iter().enumerate() {
                if let Some(p) = union_nodes.iter().position(|&m| m == n) {
                    pos1[k] = p;
                } else {
                    pos1[k] = union_nodes.len();
                    union_nodes.push(n);
                }
            }
            let u = union_nodes.len();
            let mut local = vec![0.0; u * u];

            let map0 = TriangleMap::new(&space.mesh, t0);
            let map1 = TriangleMap::new(&space.mesh, t1);
            let a = space.mesh.vertices[edge.vertices[0]];
            let b = space.mesh.vertices[edge.vertices[1]];
            let n = edge.normal;
            let len = edge.length;

            let mut jump = vec![0.0; u];
            let mut avg = vec![0.0; u];
            for q in 0..edge_rule.len() {
                let t = edge_rule.point_1d(q);
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                jump.iter_mut().for_each(|v| *v = 0.0);
                avg.iter_mut().for_each(|v| *v = 0.0);
                let b0 = space.eval_basis_ref(&map0, bary(&map0, p));
                let b1 = space.eval_basis_ref(&map1, bary(&map1, p));
                for k in 0..per {
                    let g = b0.gradients[k];
                    let h = b0.hessians[k];
                    jump[k] += n[0] * g[0] + n[1] * g[1];
                    avg[k] += 0.5 * nhn(n, h);
                }
                for k in 0..per {
                    let g = b1.gradients[k];
                    let h = b1.hessians[k];
                    jump[pos1[k]] -= n[0] * g[0] + n[1] * g[1];
                    avg[pos1[k]] += 0.5 * nhn(n, h);
                }
                let w = beta * edge_rule.weights[q];
                for i in 0..u {
                    for j in i..u {
                        let consistency = avg[i] * jump[j] + jump[i] * avg[j];
                        let penalty = sigma / len * jump[i] * jump[j];
                        local[i * u + j] += w * len * (penalty - consistency);
                    }
                }
            }

            let dofs: Vec<Option<usize>> = union_nodes
                .iter()
                .map(|&node| {
                    let d = space.dof_of_node[node];
                    if d == crate::space::CONSTRAINED {
                        None
                    } else {
                        Some(d)
                    }
                })
                .collect();
            (dofs, local)
        })
        .collect();

    let mut triplets = Vec::new();
    for (dofs, local) in &volume_locals {
        scatter_local(&mut triplets, dofs, local, per);
    }
    for (dofs, local) in &edge_locals {
        scatter_local(&mut triplets, dofs, local, dofs.len());
    }
    Ok(SparseSymMatrix::from_triplets(space.ndof, &triplets))
}

/// Barycentric coordinates of a physical point in a mapped triangle.
fn bary(map: &TriangleMap, p: [f64; 2]) -> [f64; 3] {
    let [xi, eta] = map.to_reference(p);
    [1.0 - xi - eta, xi, eta]
}

/// n·H·n for a symmetric Hessian stored as (xx, xy, yy).
fn nhn(n: [f64; 2], h: [f64; 3]) -> f64 {
    n[0] * n[0] * h[0] + 2.0 * n[0] * n[1] * h[1] + n[1] * n[1] * h[2]
}

/// Assembles the mixed-method energy operator on a degree-1 space.
pub fn assemble_mixed(space: &FeSpace, spec: &ProblemSpec) -> Result<LinearOperator> {
    if space.degree != 1 {
        return Err(Error::InvalidArgument(format!(
            "mixed formulation requires a degree-1 space, got degree {}",
            space.degree
        )));
    }
    Ok(LinearOperator::Composite(MixedOperator {
        mass: assemble_mass(space)?,
        stiffness: assemble_stiffness_grad(space)?,
        beta: spec.beta,
        inner_tol: 1e-12,
    }))
}

/// Assembles the energy operator selected by `spec.method`.
pub fn assemble_operator(space: &FeSpace, spec: &ProblemSpec) -> Result<LinearOperator> {
    match spec.method {
        Method::C0ip => Ok(LinearOperator::Explicit(assemble_c0ip(space, spec)?)),
        Method::Mixed => assemble_mixed(space, spec),
    }
}

/// Energy norm √(xᵀ A x). Fails with a diagnostic if the quadratic form is
/// negative beyond rounding, which would mean the operator lost coercivity.
pub fn energy_norm(op: &LinearOperator, coeffs: &[f64]) -> Result<f64> {
    let ax = op.apply(coeffs);
    let q: f64 = coeffs.iter().zip(&ax).map(|(a, b)| a * b).sum();
    let scale: f64 = coeffs.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if q < -1e-12 * scale {
        return Err(Error::NotCoercive { value: q });
    }
    Ok(q.max(0.0).sqrt())
}

/// Recovers the discrete control from a state: u = −Δ_h y, where the
/// discrete Laplacian satisfies (Δ_h y, v) = −(∇y, ∇v) for all v. In
/// matrix form M u = K y, solved by conjugate gradients to 1e-12.
pub fn recover_control(space: &FeSpace, state: &[f64]) -> Result<Vec<f64>> {
    let mass = assemble_mass(space)?;
    let stiffness = assemble_stiffness_grad(space)?;
    let rhs = stiffness.apply(state);
    let op = LinearOperator::Explicit(mass);
    let (u, _report) = crate::linalg::solve_spd(&op, &rhs, 1e-12)?;
    Ok(u)
}

/// Discrete Laplacian Δ_h y: solves M d = −K y.
pub fn discrete_laplacian(space: &FeSpace, state: &[f64]) -> Result<Vec<f64>> {
    let mass = assemble_mass(space)?;
    let stiffness = assemble_stiffness_grad(space)?;
    let rhs: Vec<f64> = stiffness.apply(state).iter().map(|v| -v).collect();
    let op = LinearOperator::Explicit(mass);
    let (d, _report) = crate::linalg::solve_spd(&op, &rhs, 1e-12)?;
    Ok(d)
}
