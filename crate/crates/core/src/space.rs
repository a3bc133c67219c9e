//! Lagrange finite element spaces (degree 1 and 2) with homogeneous
//! Dirichlet elimination, quadrature rules, nodal interpolation, and exact
//! prolongation between nested meshes.
//!
//! Degree 1 places one node per vertex; degree 2 adds one node per edge
//! midpoint. Only the value trace is constrained on the boundary (simply
//! supported, not clamped): every node lying on the boundary loses its
//! degree of freedom and the corresponding coefficient is pinned to zero.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureDomain {
    /// Reference triangle {ξ,η ≥ 0, ξ+η ≤ 1}, measure 1/2.
    Triangle,
    /// Reference interval [0,1], measure 1.
    Interval,
}

/// A fixed quadrature rule on a reference domain.
///
/// Interval rules store each abscissa in `points[q][0]` with `points[q][1] = 0`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub domain: QuadratureDomain,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Abscissa of an interval rule.
    pub fn point_1d(&self, q: usize) -> f64 {
        self.points[q][0]
    }
}

/// Returns a rule exact for all polynomials up to `degree` on the requested
/// reference domain. Point ordering is fixed, so repeated calls yield
/// identical rules. Triangle rules support degree ≤ 6, interval rules ≤ 9.
pub fn quadrature(domain: QuadratureDomain, degree: usize) -> Result<QuadratureRule> {
    match domain {
        QuadratureDomain::Triangle => triangle_rule(degree),
        QuadratureDomain::Interval => interval_rule(degree),
    }
}

/// Pushes the three cyclic permutations of the barycentric orbit (a, b, b)
/// as (ξ,η) = (λ₁,λ₂) points.
fn push_orbit3(points: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>, a: f64, w: f64) {
    let b = (1.0 - a) / 2.0;
    // λ = (a, b, b), (b, a, b), (b, b, a)
    points.push([b, b]);
    points.push([a, b]);
    points.push([b, a]);
    weights.extend_from_slice(&[w, w, w]);
}

fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match degree {
        0 | 1 => {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5);
        }
        2 => {
            // Edge-midpoint rule.
            points.push([0.5, 0.0]);
            points.push([0.5, 0.5]);
            points.push([0.0, 0.5]);
            weights.extend_from_slice(&[1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]);
        }
        3 => {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(-27.0 / 96.0);
            push_orbit3(&mut points, &mut weights, 0.6, 25.0 / 96.0);
        }
        4 => {
            // Two symmetric 3-orbits; parameters in closed form.
            let s10 = 10.0_f64.sqrt();
            let b = (38.0 - 44.0 * (2.0_f64 / 5.0).sqrt()).sqrt();
            let a1 = (8.0 - s10 + b) / 18.0;
            let a2 = (8.0 - s10 - b) / 18.0;
            let d = (213125.0 - 53320.0 * s10).sqrt();
            let w1 = (620.0 + d) / 3720.0 / 2.0;
            let w2 = (620.0 - d) / 3720.0 / 2.0;
            // a1 ≈ 0.4459 is the orbit parameter b of (1−2b, b, b); pass the
            // apex coordinate 1−2a to keep push_orbit3's convention.
            push_orbit3(&mut points, &mut weights, 1.0 - 2.0 * a1, w1);
            push_orbit3(&mut points, &mut weights, 1.0 - 2.0 * a2, w2);
        }
        5 => {
            let s15 = 15.0_f64.sqrt();
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(9.0 / 80.0);
            push_orbit3(
                &mut points,
                &mut weights,
                1.0 - 2.0 * (6.0 - s15) / 21.0,
                (155.0 - s15) / 2400.0,
            );
            push_orbit3(
                &mut points,
                &mut weights,
                1.0 - 2.0 * (6.0 + s15) / 21.0,
                (155.0 + s15) / 2400.0,
            );
        }
        6 => {
            // Conical product of two 4-point Gauss rules through the Duffy
            // map (ξ,η) = (u(1−v), v), dξdη = (1−v) du dv: exact for total
            // degree ≤ 7 in u and ≤ 7 in v, hence all of degree 6.
            let g = gauss_01(4);
            for &(v, wv) in &g {
                for &(u, wu) in &g {
                    points.push([u * (1.0 - v), v]);
                    weights.push(wu * wv * (1.0 - v));
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "triangle quadrature supports degree <= 6, got {degree}"
            )))
        }
    }
    Ok(QuadratureRule {
        domain: QuadratureDomain::Triangle,
        points,
        weights,
        degree,
    })
}

fn interval_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > 9 {
        return Err(Error::InvalidArgument(format!(
            "interval quadrature supports degree <= 9, got {degree}"
        )));
    }
    let n = degree / 2 + 1; // n-point Gauss is exact to degree 2n−1 ≥ degree
    let g = gauss_01(n);
    Ok(QuadratureRule {
        domain: QuadratureDomain::Interval,
        points: g.iter().map(|&(x, _)| [x, 0.0]).collect(),
        weights: g.iter().map(|&(_, w)| w).collect(),
        degree,
    })
}

/// Gauss–Legendre nodes/weights on [0,1] for 1..=5 points (closed forms).
fn gauss_01(n: usize) -> Vec<(f64, f64)> {
    // Nodes/weights on [−1,1], symmetric pairs listed negative-first.
    let sym: Vec<(f64, f64)> = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let x = 1.0 / 3.0_f64.sqrt();
            vec![(-x, 1.0), (x, 1.0)]
        }
        3 => {
            let x = (3.0_f64 / 5.0).sqrt();
            vec![(-x, 5.0 / 9.0), (0.0, 8.0 / 9.0), (x, 5.0 / 9.0)]
        }
        4 => {
            let c = (6.0_f64 / 5.0).sqrt();
            let x1 = (3.0 / 7.0 - 2.0 / 7.0 * c).sqrt();
            let x2 = (3.0 / 7.0 + 2.0 / 7.0 * c).sqrt();
            let s30 = 30.0_f64.sqrt();
            let w1 = (18.0 + s30) / 36.0;
            let w2 = (18.0 - s30) / 36.0;
            vec![(-x2, w2), (-x1, w1), (x1, w1), (x2, w2)]
        }
        5 => {
            let c = (10.0_f64 / 7.0).sqrt();
            let x1 = (5.0 - 2.0 * c).sqrt() / 3.0;
            let x2 = (5.0 + 2.0 * c).sqrt() / 3.0;
            let s70 = 70.0_f64.sqrt();
            let w1 = (322.0 + 13.0 * s70) / 900.0;
            let w2 = (322.0 - 13.0 * s70) / 900.0;
            vec![(-x2, w2), (-x1, w1), (0.0, 128.0 / 225.0), (x1, w1), (x2, w2)]
        }
        _ => unreachable!("gauss_01 called with {n} points"),
    };
    sym.into_iter()
        .map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0))
        .collect()
}

// ---------------------------------------------------------------------------
// Finite element spaces
// ---------------------------------------------------------------------------

/// Marker for nodes without a degree of freedom (boundary-eliminated).
pub const CONSTRAINED: usize = usize::MAX;

/// A Lagrange space over a shared mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub degree: usize,
    /// Number of free DOFs after boundary elimination.
    pub ndof: usize,
    /// Coordinates of all nodes: vertices first, then (degree 2) edge
    /// midpoints in edge order.
    pub node_coords: Vec<[f64; 2]>,
    /// Free DOF index per node, [`CONSTRAINED`] for eliminated nodes.
    pub dof_of_node: Vec<usize>,
    /// Node index per free DOF (inverse of `dof_of_node`).
    pub node_of_dof: Vec<usize>,
    /// True for nodes lying on the boundary.
    pub node_is_boundary: Vec<bool>,
    /// Edge indices opposite local vertices 0,1,2 of each triangle.
    tri_edges: Vec<[usize; 3]>,
}

/// Basis data of all local shape functions at one point, in physical
/// coordinates. Only the first [`FeSpace::nodes_per_tri`] entries are used.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub values: [f64; 6],
    pub gradients: [[f64; 2]; 6],
    /// Hessian entries (∂xx, ∂xy, ∂yy); constant per triangle for degree 2.
    pub hessians: [[f64; 3]; 6],
    pub count: usize,
}

/// Affine map data of one triangle: x = p0 + J·(ξ,η).
#[derive(Debug, Clone, Copy)]
pub struct TriangleMap {
    pub p0: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl TriangleMap {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let [a, b, c] = mesh.triangles[t];
        let p0 = mesh.vertices[a];
        let p1 = mesh.vertices[b];
        let p2 = mesh.vertices[c];
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        TriangleMap { p0, jac, inv, det }
    }

    /// Physical point of reference coordinates (ξ,η).
    pub fn to_physical(&self, xi: f64, eta: f64) -> [f64; 2] {
        [
            self.p0[0] + self.jac[0][0] * xi + self.jac[0][1] * eta,
            self.p0[1] + self.jac[1][0] * xi + self.jac[1][1] * eta,
        ]
    }

    /// Reference coordinates (ξ,η) of a physical point.
    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let dx = x[0] - self.p0[0];
        let dy = x[1] - self.p0[1];
        [
            self.inv[0][0] * dx + self.inv[0][1] * dy,
            self.inv[1][0] * dx + self.inv[1][1] * dy,
        ]
    }
}

/// Builds a degree-1 or degree-2 Lagrange space with all boundary nodes
/// eliminated (homogeneous Dirichlet on the value trace).
pub fn build_space(mesh: Arc<Mesh>, degree: usize) -> Result<FeSpace> {
    build(mesh, degree, true)
}

/// Same node layout but *without* boundary elimination: every node owns a
/// DOF. Used for identities that rely on the full partition of unity (mass
/// row sums, global-polynomial reproduction up to the boundary).
pub fn build_space_no_bc(mesh: Arc<Mesh>, degree: usize) -> Result<FeSpace> {
    build(mesh, degree, false)
}

fn build(mesh: Arc<Mesh>, degree: usize, eliminate: bool) -> Result<FeSpace> {
    if degree != 1 && degree != 2 {
        return Err(Error::InvalidArgument(format!(
            "unsupported polynomial degree {degree} (expected 1 or 2)"
        )));
    }
    let nv = mesh.vertices.len();
    let mut node_coords = mesh.vertices.clone();
    let mut node_is_boundary = mesh.boundary_vertices();
    if degree == 2 {
        for e in &mesh.edges {
            let p = mesh.vertices[e.vertices[0]];
            let q = mesh.vertices[e.vertices[1]];
            node_coords.push([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]);
            node_is_boundary.push(e.boundary);
        }
    }
    if !eliminate {
        node_is_boundary.iter_mut().for_each(|b| *b = false);
    }

    let mut dof_of_node = vec![CONSTRAINED; node_coords.len()];
    let mut node_of_dof = Vec::new();
    for (node, &on_boundary) in node_is_boundary.iter().enumerate() {
        if !on_boundary {
            dof_of_node[node] = node_of_dof.len();
            node_of_dof.push(node);
        }
    }
    let _ = nv;

    // Edge index per (vertex, vertex) pair, then per-triangle edge triples.
    let mut edge_of_pair = std::collections::HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        edge_of_pair.insert((edge.vertices[0], edge.vertices[1]), e);
    }
    let lookup = |a: usize, b: usize| -> usize {
        edge_of_pair[&(a.min(b), a.max(b))]
    };
    let tri_edges = mesh
        .triangles
        .iter()
        .map(|&[a, b, c]| [lookup(b, c), lookup(c, a), lookup(a, b)])
        .collect();

    Ok(FeSpace {
        mesh,
        degree,
        ndof: node_of_dof.len(),
        node_coords,
        dof_of_node,
        node_of_dof,
        node_is_boundary,
        tri_edges,
    })
}

impl FeSpace {
    pub fn nodes_per_tri(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    /// Node indices of triangle `t`, local order: vertices v0,v1,v2, then
    /// (degree 2) midpoints of (v1,v2), (v2,v0), (v0,v1).
    pub fn local_nodes(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.mesh.triangles[t];
        let mut out = [0usize; 6];
        out[0] = a;
        out[1] = b;
        out[2] = c;
        if self.degree == 2 {
            let nv = self.mesh.vertices.len();
            let tri_edges = self.triangle_edges(t);
            out[3] = nv + tri_edges[0];
            out[4] = nv + tri_edges[1];
            out[5] = nv + tri_edges[2];
        }
        out
    }

    /// Edge indices opposite local vertices 0,1,2 of triangle `t`
    /// (edge k joins the two vertices other than local vertex k).
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Free DOF indices of triangle `t` ([`None`] for eliminated nodes).
    pub fn local_dofs(&self, t: usize) -> [Option<usize>; 6] {
        let nodes = self.local_nodes(t);
        let mut out = [None; 6];
        for k in 0..self.nodes_per_tri() {
            let d = self.dof_of_node[nodes[k]];
            if d != CONSTRAINED {
                out[k] = Some(d);
            }
        }
        out
    }

    /// Per-vertex free DOF index (`None` on the boundary).
    pub fn vertex_dof_map(&self) -> Vec<Option<usize>> {
        (0..self.mesh.vertices.len())
            .map(|v| {
                let d = self.dof_of_node[v];
                if d == CONSTRAINED {
                    None
                } else {
                    Some(d)
                }
            })
            .collect()
    }

    /// Nodes eliminated by the boundary condition.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.node_is_boundary
            .iter()
            .enumerate()
            .filter_map(|(n, &b)| if b { Some(n) } else { None })
            .collect()
    }

    /// Values, gradients, and Hessians of all local shape functions of
    /// triangle `t` at a physical point inside it.
    pub fn eval_basis(&self, t: usize, point: [f64; 2]) -> Result<BasisEval> {
        let map = TriangleMap::new(&self.mesh, t);
        let [xi, eta] = map.to_reference(point);
        let lam = [1.0 - xi - eta, xi, eta];
        if lam.iter().any(|&l| l < -1e-12) {
            return Err(Error::InvalidArgument(format!(
                "point ({}, {}) lies outside triangle {t}",
                point[0], point[1]
            )));
        }
        Ok(self.eval_basis_ref(&map, lam))
    }

    /// Same as [`eval_basis`](Self::eval_basis) from barycentric coordinates
    /// (no containment check); `map` must belong to the same triangle.
    pub fn eval_basis_ref(&self, map: &TriangleMap, lam: [f64; 3]) -> BasisEval {
        // Reference gradients of the barycentric coordinates.
        const GL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let mut out = BasisEval {
            values: [0.0; 6],
            gradients: [[0.0; 2]; 6],
            hessians: [[0.0; 3]; 6],
            count: self.nodes_per_tri(),
        };
        // Physical gradient of a reference-linear function with gradient g.
        let push_grad = |g: [f64; 2]| -> [f64; 2] {
            [
                map.inv[0][0] * g[0] + map.inv[1][0] * g[1],
                map.inv[0][1] * g[0] + map.inv[1][1] * g[1],
            ]
        };
        if self.degree == 1 {
            for i in 0..3 {
                out.values[i] = lam[i];
                out.gradients[i] = push_grad(GL[i]);
            }
            return out;
        }
        // Degree 2: vertex functions λ(2λ−1), edge functions 4λλ.
        let gphys: [[f64; 2]; 3] = [push_grad(GL[0]), push_grad(GL[1]), push_grad(GL[2])];
        const PAIRS: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];
        for i in 0..3 {
            out.values[i] = lam[i] * (2.0 * lam[i] - 1.0);
            let s = 4.0 * lam[i] - 1.0;
            out.gradients[i] = [s * gphys[i][0], s * gphys[i][1]];
            out.hessians[i] = [
                4.0 * gphys[i][0] * gphys[i][0],
                4.0 * gphys[i][0] * gphys[i][1],
                4.0 * gphys[i][1] * gphys[i][1],
            ];
        }
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            out.values[3 + k] = 4.0 * lam[a] * lam[b];
            out.gradients[3 + k] = [
                4.0 * (lam[b] * gphys[a][0] + lam[a] * gphys[b][0]),
                4.0 * (lam[b] * gphys[a][1] + lam[a] * gphys[b][1]),
            ];
            out.hessians[3 + k] = [
                8.0 * gphys[a][0] * gphys[b][0],
                4.0 * (gphys[a][0] * gphys[b][1] + gphys[a][1] * gphys[b][0]),
                8.0 * gphys[a][1] * gphys[b][1],
            ];
        }
        out
    }

    /// Coefficient vector of the nodal interpolant of `f`: the value of `f`
    /// at every free node (boundary values are discarded by elimination).
    pub fn interpolate_nodal(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.node_of_dof
            .iter()
            .map(|&n| f(self.node_coords[n][0], self.node_coords[n][1]))
            .collect()
    }

    /// Evaluates the FE function with free-DOF coefficients `coeffs` at a
    /// point of triangle `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, point: [f64; 2]) -> Result<f64> {
        let basis = self.eval_basis(t, point)?;
        let dofs = self.local_dofs(t);
        let mut v = 0.0;
        for k in 0..basis.count {
            if let Some(d) = dofs[k] {
                v += coeffs[d] * basis.values[k];
            }
        }
        Ok(v)
    }

    /// Gradient of the FE function at a point of triangle `t`.
    pub fn evaluate_gradient(&self, coeffs: &[f64], t: usize, point: [f64; 2]) -> Result<[f64; 2]> {
        let basis = self.eval_basis(t, point)?;
        let dofs = self.local_dofs(t);
        let mut g = [0.0, 0.0];
        for k in 0..basis.count {
            if let Some(d) = dofs[k] {
                g[0] += coeffs[d] * basis.gradients[k][0];
                g[1] += coeffs[d] * basis.gradients[k][1];
            }
        }
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Prolongation between nested spaces
// ---------------------------------------------------------------------------

/// Barycentric coordinates (in the parent) of the corner vertices of the
/// four refinement children, matching `mesh::uniform_refine`'s child order.
const CHILD_CORNERS: [[[f64; 3]; 3]; 4] = [
    [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
    [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
    [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
];

/// Checks that `fine` was produced by one `uniform_refine` of `coarse`.
fn check_nested(coarse: &FeSpace, fine: &FeSpace) -> Result<()> {
    let cm = &coarse.mesh;
    let fm = &fine.mesh;
    let ok = coarse.degree == fine.degree
        && fm.triangles.len() == 4 * cm.triangles.len()
        && fm.vertices.len() == cm.vertices.len() + cm.edges.len()
        && cm
            .vertices
            .iter()
            .zip(fm.vertices.iter())
            .all(|(a, b)| a == b)
        && cm
            .triangles
            .iter()
            .enumerate()
            .all(|(t, tri)| fm.triangles[4 * t][0] == tri[0] && fm.triangles[4 * t + 2][2] == tri[2]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "reference space is not the uniform refinement of the coarse space".into(),
        ))
    }
}

/// Value of the parent's local shape function `m` at parent barycentric
/// coordinates `lam` (degree from `count`: 3 linear, 6 quadratic).
fn shape_at(count: usize, m: usize, lam: [f64; 3]) -> f64 {
    if count == 3 {
        return lam[m];
    }
    const PAIRS: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];
    if m < 3 {
        lam[m] * (2.0 * lam[m] - 1.0)
    } else {
        let (a, b) = PAIRS[m - 3];
        4.0 * lam[a] * lam[b]
    }
}

/// Re-expresses a coarse FE function exactly on the once-refined space.
///
/// Children sample their parent's polynomial at dyadic barycentric points,
/// so every stencil weight is an exact dyadic rational and prolongation
/// followed by [`restrict`] returns the original coefficients bitwise.
pub fn prolong(coarse: &FeSpace, fine: &FeSpace, coeffs: &[f64]) -> Result<Vec<f64>> {
    check_nested(coarse, fine)?;
    if coeffs.len() != coarse.ndof {
        return Err(Error::InvalidArgument(format!(
            "coefficient length {} does not match space dimension {}",
            coeffs.len(),
            coarse.ndof
        )));
    }
    let per = coarse.nodes_per_tri();

    // Full node values on the coarse mesh (zero at eliminated nodes).
    let mut coarse_nodes = vec![0.0; coarse.node_coords.len()];
    for (d, &n) in coarse.node_of_dof.iter().enumerate() {
        coarse_nodes[n] = coeffs[d];
    }

    let mut fine_nodes = vec![0.0; fine.node_coords.len()];
    for t in 0..coarse.mesh.triangles.len() {
        let parent_nodes = coarse.local_nodes(t);
        let mut pvals = [0.0; 6];
        for m in 0..per {
            pvals[m] = coarse_nodes[parent_nodes[m]];
        }
        for (k, corners) in CHILD_CORNERS.iter().enumerate() {
            let child = 4 * t + k;
            let child_nodes = fine.local_nodes(child);
            // Parent barycentric coordinates of the child's nodes: corners
            // first, then (degree 2) midpoints of corner pairs (1,2), (2,0),
            // (0,1) — all averages of dyadic rationals, hence exact.
            for l in 0..per {
                let lam = if l < 3 {
                    corners[l]
                } else {
                    let (a, b) = [(1, 2), (2, 0), (0, 1)][l - 3];
                    [
                        (corners[a][0] + corners[b][0]) / 2.0,
                        (corners[a][1] + corners[b][1]) / 2.0,
                        (corners[a][2] + corners[b][2]) / 2.0,
                    ]
                };
                let mut v = 0.0;
                for m in 0..per {
                    v += pvals[m] * shape_at(per, m, lam);
                }
                fine_nodes[child_nodes[l]] = v;
            }
        }
    }

    Ok(fine
        .node_of_dof
        .iter()
        .map(|&n| fine_nodes[n])
        .collect())
}

/// Samples a fine-space function back at the coarse nodes. Exact on
/// prolonged functions because every coarse node is a fine node: coarse
/// vertex v is fine vertex v, the midpoint of coarse edge e is fine vertex
/// V + e.
pub fn restrict(coarse: &FeSpace, fine: &FeSpace, fine_coeffs: &[f64]) -> Result<Vec<f64>> {
    check_nested(coarse, fine)?;
    let nv = coarse.mesh.vertices.len();
    let mut out = Vec::with_capacity(coarse.ndof);
    for &node in &coarse.node_of_dof {
        // Coarse node → the fine *vertex* carrying the same location.
        let fine_vertex = if node < nv { node } else { nv + (node - nv) };
        let d = fine.dof_of_node[fine_vertex];
        out.push(if d == CONSTRAINED { 0.0 } else { fine_coeffs[d] });
    }
    Ok(out)
}
