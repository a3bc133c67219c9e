//! Conforming triangulations of the unit square with classified edges.
//!
//! Conventions used throughout the crate:
//!
//! * Triangles are stored as counterclockwise vertex triples, so every
//!   signed area is strictly positive.
//! * Each edge stores its vertex pair with the smaller index first, the one
//!   (boundary) or two (interior) adjacent triangles in ascending index
//!   order, and a unit normal oriented away from the lower-indexed adjacent
//!   triangle (outward on boundary edges).
//! * Traces on an interior edge are combined as
//!   `jump [[v]] = v|_(lower-indexed triangle) − v|_(higher-indexed)` and
//!   `average {{v}} = (v|_lower + v|_higher) / 2`, with normal derivatives
//!   always taken along the stored edge normal.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One edge of a triangulation.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Vertex indices with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles: the lower index first, `None` on the boundary.
    pub triangles: (usize, Option<usize>),
    /// Unit normal pointing from `triangles.0` toward `triangles.1`
    /// (outward for boundary edges).
    pub normal: [f64; 2],
    /// Edge length |e|.
    pub length: f64,
    /// True when only one triangle touches the edge.
    pub boundary: bool,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        !self.boundary
    }
}

/// Orientation data for trace assembly on one edge.
///
/// `tangent` runs from the lower-numbered to the higher-numbered endpoint;
/// `normal` is the stored edge normal. `orientation` is +1 when the normal
/// equals the tangent rotated by −90° (i.e. when the lower-indexed adjacent
/// triangle traverses the edge in stored vertex order) and −1 otherwise, so
/// `normal = orientation · rot₋₉₀(tangent)` always holds.
#[derive(Debug, Clone, Copy)]
pub struct EdgeFrame {
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    pub triangles: (usize, Option<usize>),
    pub orientation: f64,
}

/// An immutable conforming triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Maximum triangle diameter.
    pub h: f64,
    /// Per-triangle diameter (longest side).
    pub h_t: Vec<f64>,
}

impl Mesh {
    /// Assembles edges, diameters, and adjacency from vertices + triangles.
    /// Edge indices are assigned in first-encounter order while scanning
    /// triangles in order, which makes the numbering deterministic.
    fn from_cells(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        // (v0, v1, first triangle, second triangle)
        let mut raw: Vec<(usize, usize, usize, Option<usize>)> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            if signed_area(&vertices, tri) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} is not counterclockwise"
                )));
            }
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&e) => {
                        if raw[e].3.is_some() {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({},{}) touches more than two triangles",
                                key.0, key.1
                            )));
                        }
                        raw[e].3 = Some(t);
                    }
                    None => {
                        lookup.insert(key, raw.len());
                        raw.push((key.0, key.1, t, None));
                    }
                }
            }
        }

        let edges = raw
            .iter()
            .map(|&(v0, v1, t0, t1)| {
                let p0 = vertices[v0];
                let p1 = vertices[v1];
                let dx = p1[0] - p0[0];
                let dy = p1[1] - p0[1];
                let length = dx.hypot(dy);
                // Outward normal of the lower-indexed triangle: rotate the
                // edge direction as traversed counterclockwise by t0.
                let (da, db) = directed_in(&triangles[t0], v0, v1);
                let q0 = vertices[da];
                let q1 = vertices[db];
                let nx = (q1[1] - q0[1]) / length;
                let ny = -(q1[0] - q0[0]) / length;
                Edge {
                    vertices: [v0, v1],
                    triangles: (t0, t1),
                    normal: [nx, ny],
                    length,
                    boundary: t1.is_none(),
                }
            })
            .collect::<Vec<_>>();

        let h_t: Vec<f64> = triangles
            .iter()
            .map(|tri| {
                (0..3)
                    .map(|k| {
                        let p = vertices[tri[k]];
                        let q = vertices[tri[(k + 1) % 3]];
                        (q[0] - p[0]).hypot(q[1] - p[1])
                    })
                    .fold(0.0_f64, f64::max)
            })
            .collect();
        let h = h_t.iter().copied().fold(0.0_f64, f64::max);

        Ok(Mesh {
            vertices,
            triangles,
            edges,
            h,
            h_t,
        })
    }

    /// Trace-orientation frame of one edge; see [`EdgeFrame`].
    pub fn edge_trace_frame(&self, edge: usize) -> Result<EdgeFrame> {
        let e = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::InvalidArgument(format!("edge index {edge} out of range")))?;
        let p0 = self.vertices[e.vertices[0]];
        let p1 = self.vertices[e.vertices[1]];
        let tangent = [(p1[0] - p0[0]) / e.length, (p1[1] - p0[1]) / e.length];
        let rotated = [tangent[1], -tangent[0]];
        let orientation = if rotated[0] * e.normal[0] + rotated[1] * e.normal[1] > 0.0 {
            1.0
        } else {
            -1.0
        };
        Ok(EdgeFrame {
            normal: e.normal,
            tangent,
            triangles: e.triangles,
            orientation,
        })
    }

    /// Signed (positive) area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t]) / 2.0
    }

    /// Total meshed area.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// True for vertices lying on at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut b = vec![false; self.vertices.len()];
        for e in &self.edges {
            if e.boundary {
                b[e.vertices[0]] = true;
                b[e.vertices[1]] = true;
            }
        }
        b
    }
}

/// Doubled signed area of a vertex triple.
fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let a = vertices[tri[0]];
    let b = vertices[tri[1]];
    let c = vertices[tri[2]];
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

/// Returns the pair (v0, v1) or (v1, v0) as traversed counterclockwise by `tri`.
fn directed_in(tri: &[usize; 3], v0: usize, v1: usize) -> (usize, usize) {
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        if a == v0 && b == v1 {
            return (v0, v1);
        }
        if a == v1 && b == v0 {
            return (v1, v0);
        }
    }
    unreachable!("edge ({v0},{v1}) not part of triangle {tri:?}");
}

/// Structured triangulation of the unit square: an (n+1)×(n+1) vertex grid
/// with every cell split along its lower-left-to-upper-right diagonal.
///
/// Yields (n+1)² vertices, 2n² triangles, 3n²+2n edges, and h = √2/n.
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "unit_square_mesh requires n >= 1".into(),
        ));
    }
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let vid = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = vid(i, j);
            let b = vid(i + 1, j);
            let c = vid(i + 1, j + 1);
            let d = vid(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::from_cells(vertices, triangles)
}

/// Splits every triangle into 4 congruent children through its edge
/// midpoints. Original vertices keep their indices; the midpoint of edge `e`
/// becomes vertex `V + e`. The children of parent `t` occupy indices
/// `4t .. 4t+3` (corner children first, central child last), so the result
/// is nested in the input: each coarse triangle is the union of its four
/// children and every coarse vertex coordinate is carried over bitwise.
pub fn uniform_refine(m: &Mesh) -> Mesh {
    let nv = m.vertices.len();
    let mut vertices = m.vertices.clone();
    vertices.extend(m.edges.iter().map(|e| {
        let p = m.vertices[e.vertices[0]];
        let q = m.vertices[e.vertices[1]];
        [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]
    }));

    // Edge index lookup for midpoint ids.
    let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, edge) in m.edges.iter().enumerate() {
        edge_of.insert((edge.vertices[0], edge.vertices[1]), e);
    }
    let mid = |a: usize, b: usize| nv + edge_of[&(a.min(b), a.max(b))];

    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for tri in &m.triangles {
        let [a, b, c] = *tri;
        let (mab, mbc, mca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }

    Mesh::from_cells(vertices, triangles)
        .expect("refinement of a valid mesh is valid")
}
