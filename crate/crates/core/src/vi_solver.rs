//! Primal-dual active set solver for the discrete variational inequality:
//! minimize ½ xᵀA x − bᵀx subject to upper bounds x_i ≤ ψ_i on a set of
//! constrained indices (here: interior mesh vertices).
//!
//! The optimality system is A x + λ = b with λ ≥ 0 supported on the
//! touching set {x = ψ}. Each iteration pins the currently active indices
//! to their bounds, solves the reduced SPD system, reads the multiplier
//! off the pinned residual, and re-estimates the active set from
//! λ + c (x − ψ) > 0. Ties (= 0) deactivate. The iteration terminates at
//! a fixed point of the active set whose optimality residuals pass.
//!
//! [`qp_oracle`] solves the same problem by exhaustive active-set
//! enumeration (or, beyond 15 constraints, projected gradients with an
//! equality-constrained polish) and exists to cross-check the iteration
//! on small instances.

use crate::assembly::LinearOperator;
use crate::error::{Error, Result};
use crate::linalg::{solve_constrained_warm, solve_spd};

/// Tuning parameters of the active-set iteration.
#[derive(Debug, Clone, Copy)]
pub struct PdasParams {
    /// Complementarity weight in the active-set indicator λ + c(x − ψ).
    pub c: f64,
    /// Maximum number of active-set updates.
    pub max_iter: usize,
    /// Stationarity tolerance for accepting a fixed point (the other
    /// optimality residuals are held tighter; see [`KktResiduals::passes`]).
    pub kkt_tol: f64,
    /// Relative tolerance of the inner conjugate-gradient solves.
    pub cg_tol: f64,
}

impl Default for PdasParams {
    fn default() -> Self {
        PdasParams {
            c: 1.0,
            max_iter: 100,
            kkt_tol: 1e-9,
            cg_tol: 1e-10,
        }
    }
}

/// A bound-constrained quadratic problem over an SPD operator.
pub struct VIProblem<'a> {
    pub op: &'a LinearOperator,
    pub load: &'a [f64],
    /// (index, bound) pairs; indices must be distinct and in range.
    pub constraints: &'a [(usize, f64)],
    pub params: PdasParams,
}

/// Optimality residuals of a candidate (state, multiplier) pair, all in
/// max norms over the constrained index set (stationarity over all DOFs).
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// max (x_i − ψ_i)⁺: bound violation.
    pub feasibility: f64,
    /// min λ_i over constrained indices (negative values are violations).
    pub multiplier_sign: f64,
    /// max |λ_i (x_i − ψ_i)|.
    pub complementarity: f64,
    /// ‖A x + λ − b‖_∞ over all DOFs.
    pub stationarity: f64,
}

impl KktResiduals {
    /// Acceptance test at stationarity tolerance `tol`: feasibility and
    /// complementarity are held one order tighter, the multiplier sign
    /// three orders (defaults: 1e-10, 1e-10, −1e-12, 1e-9 at tol = 1e-9).
    pub fn passes(&self, tol: f64) -> bool {
        self.feasibility <= 0.1 * tol
            && self.multiplier_sign >= -1e-3 * tol
            && self.complementarity <= 0.1 * tol
            && self.stationarity <= tol
    }
}

/// Solver outcome: the state, the full-length multiplier (exactly zero off
/// the active set), the final active set (sorted indices), the number of
/// active-set updates, and the optimality residuals.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Optimality residuals of an arbitrary (state, multiplier) pair for the
/// given problem.
pub fn kkt_report(problem: &VIProblem, state: &[f64], multiplier: &[f64]) -> KktResiduals {
    let ax = problem.op.apply(state);
    let mut stationarity = 0.0_f64;
    for i in 0..state.len() {
        stationarity = stationarity.max((ax[i] + multiplier[i] - problem.load[i]).abs());
    }
    let mut feasibility = 0.0_f64;
    let mut multiplier_sign = 0.0_f64;
    let mut complementarity = 0.0_f64;
    for &(i, bound) in problem.constraints {
        let gap = state[i] - bound;
        feasibility = feasibility.max(gap.max(0.0));
        multiplier_sign = multiplier_sign.min(multiplier[i]);
        complementarity = complementarity.max((multiplier[i] * gap).abs());
    }
    KktResiduals {
        feasibility,
        multiplier_sign,
        complementarity,
        stationarity,
    }
}

fn validate(problem: &VIProblem) -> Result<()> {
    let n = problem.op.dim();
    if problem.load.len() != n {
        return Err(Error::InvalidArgument(format!(
            "load has length {}, operator dimension is {n}",
            problem.load.len()
        )));
    }
    let mut seen = vec![false; n];
    for &(i, bound) in problem.constraints {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "constraint index {i} out of range for dimension {n}"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!(
                "constraint index {i} appears twice"
            )));
        }
        if !bound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "constraint bound at index {i} is not finite"
            )));
        }
        seen[i] = true;
    }
    let p = problem.params;
    if !(p.c > 0.0) || p.max_iter == 0 || !(p.kkt_tol > 0.0) || !(p.cg_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "active-set parameters must be positive (c, max_iter, tolerances)".into(),
        ));
    }
    Ok(())
}

/// Solves the bound-constrained problem by the primal-dual active set
/// iteration. Starts from the unconstrained solve; with no violated
/// bounds the result is bitwise identical to [`solve_spd`].
pub fn solve_pdas(problem: &VIProblem) -> Result<Solution> {
    solve_pdas_from(problem, None)
}

/// [`solve_pdas`] with an optional initial state (for example a coarse
/// solution prolonged to this problem's mesh). The initial state seeds
/// the first active-set classification and the first linear solve in
/// place of the unconstrained solution; the fixed point reached is
/// certified by the same optimality check either way.
pub fn solve_pdas_from(problem: &VIProblem, initial: Option<&[f64]>) -> Result<Solution> {
    validate(problem)?;
    let n = problem.op.dim();
    let params = problem.params;

    if let Some(init) = initial {
        if init.len() != n {
            return Err(Error::InvalidArgument(format!(
                "initial state has length {}, operator dimension is {n}",
                init.len()
            )));
        }
    }
    let state0 = match initial {
        Some(init) => init.to_vec(),
        None => solve_spd(problem.op, problem.load, params.cg_tol)?.0,
    };
    let mut active: Vec<usize> = problem
        .constraints
        .iter()
        .filter(|&&(i, bound)| state0[i] > bound)
        .map(|&(i, _)| i)
        .collect();
    active.sort_unstable();
    let bound_of: std::collections::HashMap<usize, f64> =
        problem.constraints.iter().copied().collect();

    let mut prev = state0;
    let mut last_stationarity = f64::INFINITY;
    for k in 1..=params.max_iter {
        let fixed: Vec<(usize, f64)> = active.iter().map(|&i| (i, bound_of[&i])).collect();
        let (state, _) =
            solve_constrained_warm(problem.op, problem.load, &fixed, params.cg_tol, Some(&prev))?;

        // Multiplier: the pinned-row residual on the active set, exact
        // zero elsewhere.
        let ax = problem.op.apply(&state);
        let mut multiplier = vec![0.0; n];
        for &i in &active {
            multiplier[i] = problem.load[i] - ax[i];
        }

        // Next active set from the complementarity indicator; ties leave.
        let mut next: Vec<usize> = problem
            .constraints
            .iter()
            .filter(|&&(i, bound)| multiplier[i] + params.c * (state[i] - bound) > 0.0)
            .map(|&(i, _)| i)
            .collect();
        next.sort_unstable();

        if next == active {
            let kkt = kkt_report(problem, &state, &multiplier);
            if kkt.passes(params.kkt_tol) {
                return Ok(Solution {
                    state,
                    multiplier,
                    active_set: active,
                    iterations: k,
                    kkt,
                });
            }
            return Err(Error::ActiveSetStalled {
                iterations: k,
                active: active.len(),
                stationarity: kkt.stationarity,
            });
        }
        last_stationarity = kkt_report(problem, &state, &multiplier).stationarity;
        active = next;
        prev = state;
    }
    Err(Error::ActiveSetStalled {
        iterations: params.max_iter,
        active: active.len(),
        stationarity: last_stationarity,
    })
}

// ---------------------------------------------------------------------------
// Reference oracle
// ---------------------------------------------------------------------------

/// Dense Gaussian elimination with partial pivoting (oracle-sized systems).
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() <= 1e-300 {
            return Err(Error::NotSpd("singular matrix in dense solve".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Materializes the operator as a dense matrix through unit-vector applies.
fn densify(op: &LinearOperator) -> Vec<Vec<f64>> {
    let n = op.dim();
    let mut a = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            a[i][j] = col[i];
        }
    }
    a
}

/// Solves the pinned system x_S = ψ_S, (A x)_i = b_i off S, for a dense A.
fn solve_pinned(
    a: &[Vec<f64>],
    b: &[f64],
    pins: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for &(i, g) in pins {
        for j in 0..n {
            if j != i {
                rhs[j] -= m[j][i] * g;
            }
        }
        for j in 0..n {
            m[i][j] = 0.0;
            m[j][i] = 0.0;
        }
        m[i][i] = 1.0;
        rhs[i] = g;
    }
    let mut x = dense_solve(m, rhs)?;
    for &(i, g) in pins {
        x[i] = g;
    }
    Ok(x)
}

/// Enumeration result with audit counts (how many candidate active sets
/// were checked and how many passed optimality).
pub(crate) fn qp_oracle_enumerate(problem: &VIProblem) -> Result<(Solution, usize, usize)> {
    let a = densify(problem.op);
    let b = problem.load;
    let m = problem.constraints.len();
    let mut passing: Vec<(u32, Vec<f64>, Vec<f64>, Vec<usize>)> = Vec::new();
    let mut checked = 0usize;

    // Masks ordered by active-set size, then numerically: with degenerate
    // ties the smallest consistent active set is reported.
    let mut masks: Vec<u32> = (0..(1u32 << m)).collect();
    masks.sort_by_key(|&s| (s.count_ones(), s));
    for mask in masks {
        checked += 1;
        let pins: Vec<(usize, f64)> = (0..m)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| problem.constraints[k])
            .collect();
        let Ok(x) = solve_pinned(&a, b, &pins) else {
            continue;
        };
        // Multiplier on the pinned set from the original rows.
        let mut lam = vec![0.0; b.len()];
        let mut ok = true;
        for &(i, _) in &pins {
            let ax_i: f64 = (0..b.len()).map(|j| a[i][j] * x[j]).sum();
            lam[i] = b[i] - ax_i;
            if lam[i] < -1e-12 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        for (k, &(i, bound)) in problem.constraints.iter().enumerate() {
            if mask >> k & 1 == 0 && x[i] > bound + 1e-10 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let active: Vec<usize> = pins.iter().map(|&(i, _)| i).collect();
        passing.push((mask, x, lam, active));
    }

    let Some((_, x, lam, mut active)) = passing.first().cloned() else {
        return Err(Error::InvalidArgument(
            "no candidate active set satisfies the optimality conditions".into(),
        ));
    };
    // Degenerate ties may admit several consistent sets, but they must all
    // describe the same state.
    for (_, other, _, _) in passing.iter().skip(1) {
        let diff = x
            .iter()
            .zip(other)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0_f64, f64::max);
        if diff > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "enumeration found conflicting optimal states (differ by {diff:e})"
            )));
        }
    }
    active.sort_unstable();
    let kkt = kkt_report(problem, &x, &lam);
    let count = passing.len();
    Ok((
        Solution {
            state: x,
            multiplier: lam,
            active_set: active,
            iterations: 0,
            kkt,
        },
        checked,
        count,
    ))
}

/// Projected-gradient fallback for more than 15 constraints: identifies
/// the active set iteratively, then polishes with one pinned dense solve.
fn qp_oracle_projected(problem: &VIProblem) -> Result<Solution> {
    let a = densify(problem.op);
    let n = problem.load.len();
    let b = problem.load;

    // Largest eigenvalue by deterministic power iteration for the step.
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; n];
    let mut lmax = 1.0;
    for _ in 0..200 {
        problem.op.apply_into(&v, &mut av);
        lmax = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lmax == 0.0 {
            lmax = 1.0;
            break;
        }
        for i in 0..n {
            v[i] = av[i] / lmax;
        }
    }
    let step = 1.0 / (1.01 * lmax);

    let mut x = vec![0.0; n];
    for _ in 0..200_000 {
        problem.op.apply_into(&x, &mut av);
        let mut shift = 0.0_f64;
        for i in 0..n {
            let xi = x[i] - step * (av[i] - b[i]);
            shift = shift.max((xi - x[i]).abs());
            x[i] = xi;
        }
        for &(i, bound) in problem.constraints {
            if x[i] > bound {
                x[i] = bound;
            }
        }
        if shift <= 1e-13 {
            break;
        }
    }

    // Read the active set off the converged iterate and polish.
    problem.op.apply_into(&x, &mut av);
    let pins: Vec<(usize, f64)> = problem
        .constraints
        .iter()
        .copied()
        .filter(|&(i, bound)| x[i] >= bound - 1e-9 && b[i] - av[i] > 0.0)
        .collect();
    let polished = solve_pinned(&a, b, &pins)?;
    let mut lam = vec![0.0; n];
    for &(i, _) in &pins {
        let ax_i: f64 = (0..n).map(|j| a[i][j] * polished[j]).sum();
        lam[i] = b[i] - ax_i;
    }
    let mut active: Vec<usize> = pins.iter().map(|&(i, _)| i).collect();
    active.sort_unstable();
    let kkt = kkt_report(problem, &polished, &lam);
    Ok(Solution {
        state: polished,
        multiplier: lam,
        active_set: active,
        iterations: 0,
        kkt,
    })
}

/// Independent reference solution for small problems (dimension ≤ 300):
/// exhaustive enumeration of candidate active sets up to 15 constraints,
/// projected gradients with a polish step beyond.
pub fn qp_oracle(problem: &VIProblem) -> Result<Solution> {
    validate(problem)?;
    let n = problem.op.dim();
    if n > 300 {
        return Err(Error::SizeCap(format!(
            "reference oracle densifies the operator; dimension {n} exceeds 300"
        )));
    }
    if problem.constraints.len() <= 15 {
        qp_oracle_enumerate(problem).map(|(s, _, _)| s)
    } else {
        qp_oracle_projected(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::SparseSymMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op_from_dense(a: &[Vec<f64>]) -> LinearOperator {
        let n = a.len();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i..n {
                if a[i][j] != 0.0 {
                    triplets.push((i, j, a[i][j]));
                }
            }
        }
        LinearOperator::Explicit(SparseSymMatrix::from_triplets(n, &triplets))
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for row in &b {
                    s += row[i] * row[j];
                }
                a[i][j] = s + if i == j { n as f64 * 0.5 } else { 0.0 };
            }
        }
        a
    }

    /// 1D Laplacian-like SPD stencil with a positive hump load.
    fn hump_problem(n: usize) -> (LinearOperator, Vec<f64>) {
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 2.0 + 0.01));
            if i + 1 < n {
                triplets.push((i, i + 1, -1.0));
            }
        }
        let op = LinearOperator::Explicit(SparseSymMatrix::from_triplets(n, &triplets));
        let load: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 + 1.0) / (n as f64 + 1.0);
                0.05 * (std::f64::consts::PI * t).sin()
            })
            .collect();
        (op, load)
    }

    #[test]
    fn single_dof_active_and_inactive() {
        let a = vec![vec![2.0]];
        let op = op_from_dense(&a);
        let load = vec![1.0];

        // Bound above the unconstrained solution 0.5: stays inactive.
        let slack = VIProblem {
            op: &op,
            load: &load,
            constraints: &[(0, 1.0)],
            params: PdasParams::default(),
        };
        let s = solve_pdas(&slack).unwrap();
        assert!((s.state[0] - 0.5).abs() <= 1e-12);
        assert!(s.active_set.is_empty());
        assert_eq!(s.multiplier[0], 0.0);

        // Bound below: pinned, with multiplier b − Aψ = 1 − 0.4 = 0.6.
        let tight = VIProblem {
            op: &op,
            load: &load,
            constraints: &[(0, 0.2)],
            params: PdasParams::default(),
        };
        let s = solve_pdas(&tight).unwrap();
        assert_eq!(s.state[0], 0.2);
        assert_eq!(s.active_set, vec![0]);
        assert!((s.multiplier[0] - 0.6).abs() <= 1e-12);
        assert!(s.kkt.passes(1e-9));

        // The oracle agrees on both.
        for p in [&slack, &tight] {
            let o = qp_oracle(p).unwrap();
            let d = (o.state[0] - solve_pdas(p).unwrap().state[0]).abs();
            assert!(d <= 1e-12);
        }
    }

    #[test]
    fn enumeration_checks_all_candidates_and_finds_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let a = random_spd(6, &mut rng);
        let op = op_from_dense(&a);
        let load: Vec<f64> = (0..6).map(|_| rng.gen_range(0.5..2.0)).collect();
        let constraints = vec![(0usize, 0.05), (2, 0.02), (5, 0.08)];
        let problem = VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params: PdasParams::default(),
        };
        let (solution, checked, passing) = qp_oracle_enumerate(&problem).unwrap();
        assert_eq!(checked, 8, "three constraints give 2³ candidate sets");
        assert_eq!(passing, 1, "the optimal active set is unique");
        assert!(solution.kkt.passes(1e-8));
    }

    #[test]
    fn iteration_matches_oracle_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..6 {
            let n = rng.gen_range(5..=12);
            let a = random_spd(n, &mut rng);
            let op = op_from_dense(&a);
            let load: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let m = rng.gen_range(1..=6.min(n));
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..m {
                let j = rng.gen_range(i..n);
                idx.swap(i, j);
            }
            let constraints: Vec<(usize, f64)> = idx[..m]
                .iter()
                .map(|&i| (i, rng.gen_range(-0.2..0.3)))
                .collect();
            let problem = VIProblem {
                op: &op,
                load: &load,
                constraints: &constraints,
                params: PdasParams::default(),
            };
            let pdas = solve_pdas(&problem).unwrap();
            let oracle = qp_oracle(&problem).unwrap();
            let diff = pdas
                .state
                .iter()
                .zip(&oracle.state)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0_f64, f64::max);
            assert!(diff <= 1e-9, "case {case}: states differ by {diff:e}");
            assert_eq!(pdas.active_set, oracle.active_set, "case {case}");
        }
    }

    #[test]
    fn projected_oracle_handles_many_constraints() {
        let (op, load) = hump_problem(20);
        let constraints: Vec<(usize, f64)> = (0..20).map(|i| (i, 0.06)).collect();
        let problem = VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params: PdasParams::default(),
        };
        assert!(constraints.len() > 15);
        let oracle = qp_oracle(&problem).unwrap();
        let pdas = solve_pdas(&problem).unwrap();
        let diff = pdas
            .state
            .iter()
            .zip(&oracle.state)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0_f64, f64::max);
        assert!(diff <= 1e-8, "states differ by {diff:e}");
        assert_eq!(pdas.active_set, oracle.active_set);
    }

    #[test]
    fn inactive_bounds_reproduce_the_unconstrained_solve_bitwise() {
        let (op, load) = hump_problem(30);
        let constraints: Vec<(usize, f64)> = (0..30).map(|i| (i, 1e6)).collect();
        let problem = VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params: PdasParams::default(),
        };
        let s = solve_pdas(&problem).unwrap();
        let (unconstrained, _) = solve_spd(&op, &load, problem.params.cg_tol).unwrap();
        assert_eq!(s.state, unconstrained);
        assert!(s.active_set.is_empty());
        assert!(s.multiplier.iter().all(|&l| l == 0.0));
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn active_sets_grow_as_the_obstacle_tightens() {
        let (op, load) = hump_problem(25);
        let constraints_at = |level: f64| -> Vec<(usize, f64)> {
            (0..25).map(|i| (i, level)).collect()
        };
        let mut previous: Option<Vec<usize>> = None;
        for level in [0.09, 0.07, 0.05] {
            let constraints = constraints_at(level);
            let problem = VIProblem {
                op: &op,
                load: &load,
                constraints: &constraints,
                params: PdasParams::default(),
            };
            let s = solve_pdas(&problem).unwrap();
            if let Some(prev) = &previous {
                for i in prev {
                    assert!(
                        s.active_set.contains(i),
                        "index {i} active at looser level but not at {level}"
                    );
                }
                assert!(s.active_set.len() >= prev.len());
            }
            previous = Some(s.active_set);
        }
        assert!(!previous.unwrap().is_empty());
    }

    #[test]
    fn iteration_count_stays_small() {
        let (op, load) = hump_problem(50);
        let constraints: Vec<(usize, f64)> = (0..50).map(|i| (i, 0.055)).collect();
        let problem = VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params: PdasParams::default(),
        };
        let s = solve_pdas(&problem).unwrap();
        assert!(!s.active_set.is_empty());
        assert!(
            s.iterations <= 30,
            "active-set iteration took {} updates",
            s.iterations
        );
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let (op, load) = hump_problem(40);
        let constraints: Vec<(usize, f64)> = (0..40).map(|i| (i, 0.055)).collect();
        let params = PdasParams {
            max_iter: 1,
            ..PdasParams::default()
        };
        let problem = VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params,
        };
        match solve_pdas(&problem) {
            Err(Error::ActiveSetStalled { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("expected a stall at the iteration budget, got {other:?}"),
        }
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let (op, load) = hump_problem(5);
        let base = PdasParams::default();
        for (constraints, params) in [
            (vec![(9usize, 0.0)], base),
            (vec![(1, 0.0), (1, 0.1)], base),
            (vec![(1, f64::NAN)], base),
            (
                vec![(1, 0.0)],
                PdasParams {
                    c: 0.0,
                    ..base
                },
            ),
        ] {
            let problem = VIProblem {
                op: &op,
                load: &load,
                constraints: &constraints,
                params,
            };
            assert!(solve_pdas(&problem).is_err());
        }
    }

    #[test]
    fn report_flags_each_violation_kind() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let op = op_from_dense(&a);
        let load = vec![1.0, 1.0];
        let constraints = vec![(0usize, 0.5), (1usize, 0.5)];
        let problem = VIProblem {
            op: &op,
            load: &load,
            constraints: &constraints,
            params: PdasParams::default(),
        };
        // Infeasible state.
        let r = kkt_report(&problem, &[0.7, 0.0], &[0.0, 0.0]);
        assert!(r.feasibility >= 0.2 - 1e-15);
        assert!(!r.passes(1e-9));
        // Negative multiplier and broken complementarity.
        let r = kkt_report(&problem, &[0.2, 0.5], &[-0.3, 0.5]);
        assert!(r.multiplier_sign <= -0.3 + 1e-15);
        assert!(r.complementarity >= 0.09 - 1e-15);
        // A consistent optimal pair passes.
        let r = kkt_report(&problem, &[0.5, 0.5], &[0.5, 0.5]);
        assert!(r.passes(1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        /// Whatever the data, an accepted solution is feasible, has a
        /// nonnegative multiplier supported on the active set, and its
        /// reported optimality residuals pass the acceptance thresholds.
        #[test]
        fn accepted_solutions_are_optimal(
            seed in 0u64..1000,
            n in 2usize..8,
            level in 0.01f64..0.5,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(n, &mut rng);
            let op = op_from_dense(&a);
            let load: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let constraints: Vec<(usize, f64)> = (0..n).map(|i| (i, level)).collect();
            let problem = VIProblem {
                op: &op,
                load: &load,
                constraints: &constraints,
                params: PdasParams::default(),
            };
            let s = solve_pdas(&problem).unwrap();
            prop_assert!(s.kkt.passes(problem.params.kkt_tol));
            for &(i, bound) in &constraints {
                prop_assert!(s.state[i] <= bound + 1e-10);
                if s.active_set.contains(&i) {
                    prop_assert!(s.multiplier[i] >= -1e-12);
                } else {
                    prop_assert!(s.multiplier[i] == 0.0);
                }
            }
        }
    }
}
