//! Linear solves with ℒ and the principal eigenpair.
//!
//! The energy matrix A = A_loc + A_nl is symmetric positive definite on the
//! free degrees of freedom, so conjugate gradients with a Jacobi
//! preconditioner is the workhorse. The principal eigenpair of
//! A φ = λ M_Ω φ comes from inverse power iteration, each step one CG
//! solve warm-started from the previous one; M_Ω is only semidefinite
//! (collar hats carry no Ω mass) but the iteration lives in the range of
//! the inverse and converges to the smallest pencil eigenvalue all the same.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::operators::OperatorSet;

/// Outcome of one conjugate gradient run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Final absolute residual ‖b - Ax‖₂.
    pub residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for SPD systems. Stops when
/// ‖r‖ ≤ tol_rel ‖b‖; reports stagnation as an error when fifty iterations
/// pass without improving the best residual.
pub fn pcg(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    tol_rel: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: DVector::zeros(n),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let inv_diag = DVector::from_fn(n, |i, _| {
        let d = a[(i, i)];
        if d > 0.0 {
            1.0 / d
        } else {
            1.0
        }
    });
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut r = b - a * &x;
    let target = tol_rel * b_norm;
    let mut res = r.norm();
    if res <= target {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: res,
            converged: true,
        });
    }
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut best = res;
    let mut best_iter = 0usize;
    for iter in 1..=max_iter {
        let ap = a * &p;
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::SolverStagnation {
                iterations: iter,
                residual: res,
            });
        }
        let alpha = rz / pap;
        x += alpha * &p;
        r -= alpha * &ap;
        res = r.norm();
        if res <= target {
            return Ok(CgOutcome {
                x,
                iterations: iter,
                residual: res,
                converged: true,
            });
        }
        // CG residuals plateau for long stretches on fine meshes before
        // dropping; only a patience on the scale of the system size is a
        // trustworthy sign of a defective matrix.
        if res < 0.999 * best {
            best = res;
            best_iter = iter;
        } else if iter - best_iter > 300.max(2 * n) {
            return Err(Error::SolverStagnation {
                iterations: iter,
                residual: res,
            });
        }
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        p = &z + (rz_new / rz) * &p;
        rz = rz_new;
    }
    Ok(CgOutcome {
        x,
        iterations: max_iter,
        residual: res,
        converged: false,
    })
}

/// Report from solving ℒu = f weakly.
#[derive(Debug, Clone)]
pub struct LinearSolveReport {
    pub u: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    pub tolerance_met: bool,
    /// ½η(u)² - ∫_Ω f u, the value of the quadratic energy at the solution.
    pub energy_value: f64,
}

/// Solves A u = M_Ω f for the interpolated right side f. The right side is
/// integrated against Ω only: forcing lives on the domain, while the collar
/// carries nothing but the natural nonlocal condition.
pub fn solve_linear(ops: &OperatorSet, f: &GridFunction, tol: f64, max_iter: usize) -> Result<LinearSolveReport> {
    f.check_len(&ops.mesh)?;
    let rhs = &ops.m_omega * f.free(&ops.mesh);
    let out = pcg(&ops.a_total, &rhs, None, tol, max_iter)?;
    if !out.converged {
        return Err(Error::NoConvergence {
            what: "conjugate gradient solve",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    let energy_value = 0.5 * (&ops.a_total * &out.x).dot(&out.x) - rhs.dot(&out.x);
    Ok(LinearSolveReport {
        u: GridFunction::from_free(&ops.mesh, &out.x),
        iterations: out.iterations,
        residual: out.residual,
        tolerance_met: out.converged,
        energy_value,
    })
}

/// Principal pencil eigenpair, sup-normalized with positive sign.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: GridFunction,
    /// Relative residual ‖Aφ - λMφ‖ / ‖Aφ‖.
    pub residual: f64,
    pub iterations: usize,
}

/// Inverse power iteration for the smallest eigenvalue of A v = λ M_Ω v,
/// stopping when the Rayleigh quotient stagnates relative to `tol`.
pub fn first_eigenpair(ops: &OperatorSet, tol: f64, max_iter: usize) -> Result<EigenPair> {
    let n = ops.a_total.nrows();
    let mut v = DVector::from_element(n, 1.0);
    let mut lambda = 0.0_f64;
    let mut warm: Option<DVector<f64>> = None;
    let mut residual = f64::INFINITY;
    let mut stagnant_streak = 0usize;
    for iter in 1..=max_iter {
        let mv = &ops.m_omega * &v;
        let out = pcg(&ops.a_total, &mv, warm.as_ref(), 1e-13, 40 * n + 200)?;
        let mut y = out.x;
        let scale = y.amax();
        if !(scale > 0.0) {
            return Err(Error::NoConvergence {
                what: "inverse power iteration",
                iterations: iter,
                residual: f64::INFINITY,
            });
        }
        y /= scale;
        let ay = &ops.a_total * &y;
        let my = &ops.m_omega * &y;
        let ymy = y.dot(&my);
        if ymy <= 0.0 {
            return Err(Error::NoConvergence {
                what: "inverse power iteration",
                iterations: iter,
                residual: f64::INFINITY,
            });
        }
        let lambda_new = y.dot(&ay) / ymy;
        residual = (&ay - lambda_new * &my).norm() / ay.norm();
        if (lambda_new - lambda).abs() <= tol * lambda_new.abs() {
            stagnant_streak += 1;
        } else {
            stagnant_streak = 0;
        }
        lambda = lambda_new;
        warm = Some(y.clone());
        v = y;
        // A stagnant quotient still leaves the vector an order behind;
        // a few more inverse steps contract it by the spectral gap each.
        if stagnant_streak >= 4 {
            // Orient positive: the limit has one sign on Ω.
            let mass = (&ops.m_omega * &v).sum();
            if mass < 0.0 {
                v = -v;
            }
            let sup = v.amax();
            v /= sup;
            return Ok(EigenPair {
                lambda,
                phi: GridFunction::from_free(&ops.mesh, &v),
                residual,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "inverse power iteration",
        iterations: max_iter,
        residual,
    })
}
