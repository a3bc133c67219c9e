//! Iterative solvers for the symmetric positive definite systems produced
//! by assembly: Jacobi-preconditioned conjugate gradients, plus an
//! equality-constrained variant that pins selected components.
//!
//! All loops are sequential with a fixed operation order, so repeated
//! solves of the same system produce bitwise-identical iterates.

use std::time::Instant;

use crate::assembly::LinearOperator;
use crate::error::{Error, Result};

/// Outcome statistics of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Conjugate-gradient iterations performed.
    pub iterations: usize,
    /// True relative residual ‖b − Ax‖/‖b‖ at exit (0 when b = 0). May
    /// exceed the requested tolerance when the double-precision
    /// attainability floor governed the stop; callers that need a hard
    /// guarantee must check this field (or their own residual) directly.
    pub relative_residual: f64,
    /// Wall-clock time of the solve.
    pub wall_seconds: f64,
}

/// Safety margin on the attainable-residual estimate: evaluating b − Ax
/// in floating point carries an error of order ε·(‖A‖·‖x‖ + ‖b‖), below
/// which the residual is rounding noise that no iteration can reduce.
const FLOOR_MARGIN: f64 = 16.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Core preconditioned CG. `fixed` masks components that must not move
/// (their residual entries are projected out each iteration, so with a
/// feasible `x0` they stay bitwise constant); `x0` warm-starts the
/// iteration; `trace` observes each iterate (diagnostics only).
pub(crate) fn pcg(
    op: &LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    fixed: Option<&[bool]>,
    tol: f64,
    max_iter: usize,
    mut trace: Option<&mut dyn FnMut(&[f64])>,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.dim();
    if b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has length {}, operator dimension is {n}",
            b.len()
        )));
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::InvalidArgument(format!(
                "initial guess has length {}, operator dimension is {n}",
                x0.len()
            )));
        }
    }
    let project = |v: &mut [f64]| {
        if let Some(mask) = fixed {
            for (vi, &m) in v.iter_mut().zip(mask) {
                if m {
                    *vi = 0.0;
                }
            }
        }
    };

    // Reference scale: the projected right-hand side (what the free part
    // of the system actually has to match).
    let mut b_free = b.to_vec();
    project(&mut b_free);
    let bnorm = norm(&b_free);

    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 && x0.is_none() {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };

    let diag = op.precond_diagonal();
    let mask_of = |i: usize| fixed.map_or(false, |m| m[i]);
    let mut free_maxdiag = 0.0_f64;
    for (i, &d) in diag.iter().enumerate() {
        if !mask_of(i) {
            if d <= 0.0 {
                return Err(Error::NotSpd(
                    "operator has a nonpositive diagonal entry".into(),
                ));
            }
            free_maxdiag = free_maxdiag.max(d);
        }
    }

    // A residual below this level is indistinguishable from the rounding
    // error of computing b − Ax, so it counts as converged even when the
    // requested tolerance is tighter. The largest free diagonal entry
    // stands in for ‖A‖.
    let attainable = |x: &[f64]| FLOOR_MARGIN * f64::EPSILON * (free_maxdiag * norm(x) + bnorm);

    let mut ax = vec![0.0; n];
    op.apply_into(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    project(&mut r);

    let true_rel = |x: &[f64], ax_buf: &mut Vec<f64>| -> f64 {
        op.apply_into(x, ax_buf);
        let mut rt: Vec<f64> = b.iter().zip(ax_buf.iter()).map(|(bi, ai)| bi - ai).collect();
        project(&mut rt);
        norm(&rt) / scale
    };

    if norm(&r) <= (tol * scale).max(attainable(&x)) {
        let rel = norm(&r) / scale;
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                relative_residual: rel,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }

    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0usize;
    let mut restarts = 0usize;

    while iterations < max_iter {
        op.apply_into(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Either breakdown near convergence or a genuinely indefinite
            // operator; the true residual decides.
            let rel = true_rel(&x, &mut ax);
            if rel * scale <= (tol * scale).max(attainable(&x)) {
                return Ok((
                    x,
                    SolveReport {
                        iterations,
                        relative_residual: rel,
                        wall_seconds: start.elapsed().as_secs_f64(),
                    },
                ));
            }
            return Err(Error::NotSpd(format!(
                "conjugate gradients found a direction of nonpositive curvature (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t(&x);
        }
        if norm(&r) <= (tol * scale).max(attainable(&x)) {
            // Confirm against the true residual; restart from it if the
            // recurrence has drifted.
            let rel = true_rel(&x, &mut ax);
            if rel * scale <= (tol * scale).max(attainable(&x)) {
                return Ok((
                    x,
                    SolveReport {
                        iterations,
                        relative_residual: rel,
                        wall_seconds: start.elapsed().as_secs_f64(),
                    },
                ));
            }
            restarts += 1;
            if restarts > 3 {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: rel,
                });
            }
            r.copy_from_slice(&b);
            op.apply_into(&x, &mut ax);
            for i in 0..n {
                r[i] -= ax[i];
            }
            project(&mut r);
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            project(&mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let rel = true_rel(&x, &mut ax);
    if rel * scale <= (tol * scale).max(attainable(&x)) {
        return Ok((
            x,
            SolveReport {
                iterations,
                relative_residual: rel,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    Err(Error::NoConvergence {
        iterations,
        residual: rel,
    })
}

fn default_cap(n: usize) -> usize {
    (10 * n).max(50)
}

/// Solves A x = b for a symmetric positive definite operator by
/// Jacobi-preconditioned conjugate gradients, to relative residual `tol`
/// or to the double-precision attainability floor of the system,
/// whichever is larger; the report carries the achieved residual.
pub fn solve_spd(op: &LinearOperator, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    pcg(op, b, None, None, tol, default_cap(op.dim()), None)
}

/// Solves A x = b subject to x[i] = g for each (i, g) in `fixed`. The
/// pinned components are exact in the result; the free components solve
/// the symmetrically reduced system.
pub fn solve_constrained(
    op: &LinearOperator,
    b: &[f64],
    fixed: &[(usize, f64)],
    tol: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    solve_constrained_warm(op, b, fixed, tol, None)
}

/// Same as [`solve_constrained`] with a warm-start guess for the free
/// components (its pinned components are overwritten by `fixed`).
pub(crate) fn solve_constrained_warm(
    op: &LinearOperator,
    b: &[f64],
    fixed: &[(usize, f64)],
    tol: f64,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.dim();
    if fixed.is_empty() && x0.is_none() {
        return solve_spd(op, b, tol);
    }
    let mut mask = vec![false; n];
    let mut values = vec![0.0; n];
    for &(i, g) in fixed {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "fixed index {i} out of range for dimension {n}"
            )));
        }
        if mask[i] && values[i] != g {
            return Err(Error::InvalidArgument(format!(
                "index {i} fixed to two different values ({} and {g})",
                values[i]
            )));
        }
        mask[i] = true;
        values[i] = g;
    }

    // Start from the warm guess (or zero) with the pinned values imposed;
    // the masked iteration then never moves them.
    let mut start = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    for i in 0..n {
        if mask[i] {
            start[i] = values[i];
        }
    }
    if mask.iter().all(|&m| m) {
        return Ok((
            start,
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                wall_seconds: 0.0,
            },
        ));
    }
    let use_mask = if fixed.is_empty() { None } else { Some(&mask[..]) };
    pcg(op, b, Some(&start), use_mask, tol, default_cap(n), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::SparseSymMatrix;
    use crate::test_support::solve_dense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random SPD matrix A = BᵀB + I as dense rows and sparse form.
    fn random_spd(n: usize, seed: u64) -> (Vec<Vec<f64>>, LinearOperator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for (k, row) in b.iter().enumerate() {
                    let _ = k;
                    s += row[i] * row[j];
                }
                a[i][j] = s + if i == j { 1.0 } else { 0.0 };
            }
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i..n {
                triplets.push((i, j, a[i][j]));
            }
        }
        let sparse = SparseSymMatrix::from_triplets(n, &triplets);
        (a, LinearOperator::Explicit(sparse))
    }

    #[test]
    fn solves_match_dense_elimination() {
        for seed in [1u64, 2, 3] {
            let n = 20;
            let (dense, op) = random_spd(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (x, report) = solve_spd(&op, &b, 1e-12).unwrap();
            let exact = solve_dense(&dense, &b);
            for i in 0..n {
                assert!((x[i] - exact[i]).abs() <= 1e-9, "component {i}");
            }
            assert!(report.relative_residual <= 1e-12);
        }
    }

    #[test]
    fn energy_error_is_monotone_along_cg_iterates() {
        let n = 30;
        let (dense, op) = random_spd(n, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = solve_dense(&dense, &b);
        let mut energies = Vec::new();
        {
            let mut trace = |x: &[f64]| {
                let e: Vec<f64> = x.iter().zip(&exact).map(|(a, b)| a - b).collect();
                let mut ae = vec![0.0; n];
                op.apply_into(&e, &mut ae);
                energies.push(dot(&e, &ae));
            };
            pcg(&op, &b, None, None, 1e-12, 1000, Some(&mut trace)).unwrap();
        }
        assert!(energies.len() > 3);
        for w in energies.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12) + 1e-15,
                "energy error increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn constrained_solve_matches_dense_reduction() {
        let n = 20;
        let (dense, op) = random_spd(n, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fixed: Vec<(usize, f64)> = vec![(0, 0.5), (3, -1.0), (7, 0.0), (11, 2.0), (19, 0.25)];
        let (x, _) = solve_constrained(&op, &b, &fixed, 1e-12).unwrap();

        // Dense reference: eliminate rows/columns symmetrically.
        let mut a = dense.clone();
        let mut rhs = b.clone();
        for &(i, g) in &fixed {
            for j in 0..n {
                if j != i {
                    rhs[j] -= a[j][i] * g;
                }
            }
            for j in 0..n {
                a[i][j] = 0.0;
                a[j][i] = 0.0;
            }
            a[i][i] = 1.0;
            rhs[i] = g;
        }
        let exact = solve_dense(&a, &rhs);
        for i in 0..n {
            assert!(
                (x[i] - exact[i]).abs() <= 1e-10,
                "component {i}: {} vs {}",
                x[i],
                exact[i]
            );
        }
        // Pinned components are exact, not approximate.
        for &(i, g) in &fixed {
            assert_eq!(x[i], g);
        }
    }

    #[test]
    fn zero_rhs_returns_zero_without_iterating() {
        let (_, op) = random_spd(10, 4);
        let b = vec![0.0; 10];
        let (x, report) = solve_spd(&op, &b, 1e-12).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(report.iterations, 0);
        assert_eq!(report.relative_residual, 0.0);
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let (_, op) = random_spd(25, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let b: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x1, r1) = solve_spd(&op, &b, 1e-11).unwrap();
        let (x2, r2) = solve_spd(&op, &b, 1e-11).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(r1.iterations, r2.iterations);
        assert_eq!(r1.relative_residual, r2.relative_residual);
    }

    #[test]
    fn report_residual_matches_recomputation() {
        let (_, op) = random_spd(15, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, report) = solve_spd(&op, &b, 1e-10).unwrap();
        let ax = op.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = norm(&r) / norm(&b);
        assert!((rel - report.relative_residual).abs() <= 1e-15 * (1.0 + rel));
        assert!(rel <= 1e-10);
    }

    #[test]
    fn indefinite_operator_is_rejected() {
        let triplets = vec![(0usize, 0usize, 1.0), (1, 1, -1.0)];
        let op = LinearOperator::Explicit(SparseSymMatrix::from_triplets(2, &triplets));
        let err = solve_spd(&op, &[1.0, 1.0], 1e-12).unwrap_err();
        match err {
            Error::NotSpd(_) => {}
            other => panic!("expected a definiteness error, got {other:?}"),
        }
    }

    #[test]
    fn all_fixed_and_empty_fixed_edge_cases() {
        let (_, op) = random_spd(5, 2);
        let b = vec![1.0; 5];
        let fixed: Vec<(usize, f64)> = (0..5).map(|i| (i, i as f64)).collect();
        let (x, report) = solve_constrained(&op, &b, &fixed, 1e-12).unwrap();
        assert_eq!(x, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(report.iterations, 0);

        // No constraints at all: identical to the unconstrained solve.
        let (xu, _) = solve_spd(&op, &b, 1e-12).unwrap();
        let (xc, _) = solve_constrained(&op, &b, &[], 1e-12).unwrap();
        assert_eq!(xu, xc);

        // Conflicting pins are rejected; out-of-range pins are rejected.
        assert!(solve_constrained(&op, &b, &[(1, 0.0), (1, 1.0)], 1e-12).is_err());
        assert!(solve_constrained(&op, &b, &[(9, 0.0)], 1e-12).is_err());
    }
}
