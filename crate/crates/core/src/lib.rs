//! Finite element solver for elliptic distributed optimal control with a
//! pointwise upper bound on the state.
//!
//! The constrained optimal state is characterized as the solution of a
//! fourth-order variational inequality for the energy form
//! a(y, z) = β (D²y, D²z) + (y, z) over an obstacle set {y ≤ ψ}. Two
//! discretizations are implemented — a degree-2 C0 interior penalty method
//! and a degree-1 mixed method — and the discrete inequality (constrained
//! at interior mesh vertices) is solved by a primal-dual active set
//! iteration. The optimal control is recovered from the state through the
//! discrete Laplacian.
//!
//! Module map:
//! * [`mesh`]: structured triangulations of the unit square, uniform
//!   refinement, edge adjacency and trace frames.
//! * [`space`]: Lagrange spaces, quadrature, interpolation, prolongation.
//! * [`fields`]: closed-form scalar data fields (targets, obstacles).
//! * [`assembly`]: the two energy operators, loads, control recovery.
//! * [`linalg`]: conjugate-gradient solvers (plain and pinned).
//! * [`vi_solver`]: primal-dual active set iteration, optimality
//!   diagnostics, and a brute-force reference solver for small problems.
//! * [`harness`]: benchmark definitions, error measures, convergence
//!   studies.
//! * [`vtk`]: legacy-format visualization output.
//! * [`cli`]: configuration parsing and the command-line entry point.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod fields;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod space;
pub mod vi_solver;
pub mod vtk;

pub use error::{Error, Result};
