//! Monotone regularized scheme for the singular problem ℒu = u^{-q}.
//!
//! The level-n problem replaces the singular nonlinearity by the truncated
//! derivative g_n(v) = (v⁺ + 1/n)^{-q}, the derivative of the C¹ primitive
//! 𝒢_n(v) = (v⁺ + 1/n)^{1-q}/(1-q) - n^q v⁻. Discretely, with the lumped
//! Ω weights w_i, the level-n solution solves (A u)_i = w_i g_n(u_i) at
//! every free i: a fixed point of the inverse-monotone map
//! u ↦ A⁻¹(w ⊙ g_n(u)). Plain
//! Picard iteration has contraction factor about q and diverges past q = 1,
//! so the update is damped with weight θ = 1/(1+q), which contracts for
//! every q > 0. Levels n = 1, 2, 4, ... increase g_n pointwise, and
//! inverse monotonicity of A turns that into nodal monotonicity of the
//! solutions, checked at run time.
//!
//! For 0 < q < 1 the schedule limit is polished by a Newton iteration on
//! the unregularized system A u = w ⊙ u^{-q}; starting from the last level,
//! which is a subsolution, Newton on this concave system climbs
//! monotonically to the discrete solution, where the energy identity
//! η(û)² = Σ w_i û_i^{1-q} holds to rounding. For q ≥ 1 the limit object
//! is the last level itself and only the transformed bounds apply.

use nalgebra::DVector;

use crate::elliptic::pcg;
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::operators::{energy_norm_sq, OperatorSet};

/// The truncated primitive 𝒢_n(v) = (v⁺ + 1/n)^{1-q}/(1-q) - n^q v⁻
/// (logarithmic at q = 1), whose derivative is the regularized right side.
pub fn g_n(v: f64, n: f64, q: f64) -> f64 {
    let plus = v.max(0.0);
    let minus = (-v).max(0.0);
    if (q - 1.0).abs() < 1e-14 {
        (plus + 1.0 / n).ln() - minus * n
    } else {
        (plus + 1.0 / n).powf(1.0 - q) / (1.0 - q) - n.powf(q) * minus
    }
}

/// 𝒢_n'(v) = (v⁺ + 1/n)^{-q}, the regularized nonlinearity itself.
pub fn g_n_derivative(v: f64, n: f64, q: f64) -> f64 {
    (v.max(0.0) + 1.0 / n).powf(-q)
}

/// Converged state of one regularization level.
#[derive(Debug, Clone)]
pub struct RegularizedLevel {
    pub n: u64,
    pub u: GridFunction,
    pub outer_iterations: usize,
    /// ‖A u - w ⊙ g_n(u)‖₂ over the free indices.
    pub weak_residual: f64,
    pub energy_sq: f64,
    pub sup_norm: f64,
    pub min_interior: f64,
}

/// Limit object extracted from a finished schedule.
#[derive(Debug, Clone)]
pub struct SingularLimit {
    pub u_hat: GridFunction,
    pub energy_sq: f64,
    /// |η(û)² - Σ w û^{1-q}|, only meaningful below q = 1.
    pub identity_gap: Option<f64>,
    pub sup_norm: f64,
    pub min_interior: f64,
    pub polished: bool,
}

/// A full schedule run: every level in order plus the limit.
#[derive(Debug, Clone)]
pub struct SingularRun {
    pub q: f64,
    pub levels: Vec<RegularizedLevel>,
    pub limit: SingularLimit,
    /// Largest nodal drop u_n - u_{n+1} observed between adjacent levels
    /// (negative or tiny positive when monotonicity holds).
    pub max_monotonicity_defect: f64,
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "singular exponent q must be positive, got {q}"
        )));
    }
    Ok(())
}

fn weak_residual(ops: &OperatorSet, free: &DVector<f64>, n: f64, q: f64) -> f64 {
    let rhs = DVector::from_fn(free.len(), |i, _| {
        ops.lumped_omega[i] * g_n_derivative(free[i], n, q)
    });
    (&ops.a_total * free - rhs).norm()
}

/// Solves the level-n problem by the damped fixed point iteration,
/// warm-started from `u0`.
pub fn solve_level(
    ops: &OperatorSet,
    q: f64,
    n: u64,
    u0: &GridFunction,
    tol: f64,
    max_outer: usize,
) -> Result<RegularizedLevel> {
    check_q(q)?;
    if n == 0 {
        return Err(Error::InvalidParameter("regularization level must be at least 1".into()));
    }
    u0.check_len(&ops.mesh)?;
    let nf = n as f64;
    let theta = 1.0 / (1.0 + q);
    let mut u = u0.free(&ops.mesh);
    let mut warm: Option<DVector<f64>> = None;
    let dim = u.len();
    for outer in 1..=max_outer {
        let rhs = DVector::from_fn(dim, |i, _| ops.lumped_omega[i] * g_n_derivative(u[i], nf, q));
        let lin = pcg(&ops.a_total, &rhs, warm.as_ref(), 1e-13, 40 * dim + 200)?;
        let next = (1.0 - theta) * &u + theta * &lin.x;
        let step = energy_norm_sq(ops, &GridFunction::from_free(&ops.mesh, &(&next - &u)))?
            .max(0.0)
            .sqrt();
        let scale = energy_norm_sq(ops, &GridFunction::from_free(&ops.mesh, &next))?
            .max(0.0)
            .sqrt();
        warm = Some(lin.x);
        u = next;
        if step <= tol * scale.max(1e-300) {
            let grid = GridFunction::from_free(&ops.mesh, &u);
            return Ok(RegularizedLevel {
                n,
                weak_residual: weak_residual(ops, &u, nf, q),
                energy_sq: energy_norm_sq(ops, &grid)?,
                sup_norm: grid.sup_norm(),
                min_interior: grid.min_omega(&ops.mesh),
                u: grid,
                outer_iterations: outer,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "regularized level iteration",
        iterations: max_outer,
        residual: weak_residual(ops, &u, nf, q),
    })
}

/// Newton polish on the unregularized system A u = w ⊙ u^{-q}, valid for
/// 0 < q < 1. The Jacobian A + q diag(w u^{-q-1}) is positive definite,
/// and from a subsolution the iterates increase toward the root.
fn newton_polish(ops: &OperatorSet, q: f64, start: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = start.len();
    let mut u = start.clone();
    let f_of = |v: &DVector<f64>| -> DVector<f64> {
        let rhs = DVector::from_fn(dim, |i, _| {
            let w = ops.lumped_omega[i];
            if w > 0.0 {
                w * v[i].powf(-q)
            } else {
                0.0
            }
        });
        &ops.a_total * v - rhs
    };
    let mut fval = f_of(&u);
    let scale0 = (&ops.a_total * &u).norm();
    let target = 1e-13 * scale0.max(1e-300);
    for _ in 0..60 {
        if fval.norm() <= target {
            return Ok(u);
        }
        let mut jac = ops.a_total.clone();
        for i in 0..dim {
            let w = ops.lumped_omega[i];
            if w > 0.0 {
                jac[(i, i)] += q * w * u[i].powf(-q - 1.0);
            }
        }
        let chol = jac.cholesky().ok_or(Error::NoConvergence {
            what: "Newton polish factorization",
            iterations: 0,
            residual: fval.norm(),
        })?;
        let delta = chol.solve(&(-&fval));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &u + t * &delta;
            let positive = (0..dim).all(|i| ops.lumped_omega[i] == 0.0 || trial[i] > 0.0);
            if positive {
                let ftrial = f_of(&trial);
                if ftrial.norm() < fval.norm() {
                    u = trial;
                    fval = ftrial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if fval.norm() <= 10.0 * target {
        Ok(u)
    } else {
        Err(Error::NoConvergence {
            what: "Newton polish",
            iterations: 60,
            residual: fval.norm(),
        })
    }
}

/// Runs the whole increasing schedule from the zero iterate.
pub fn run_schedule(
    ops: &OperatorSet,
    q: f64,
    schedule: &[u64],
    tol: f64,
    max_outer: usize,
) -> Result<SingularRun> {
    run_schedule_from(ops, q, schedule, tol, max_outer, &GridFunction::zeros(&ops.mesh))
}

/// Runs the whole increasing schedule, warm-starting the first level from
/// `u0`, enforcing nodal monotonicity across levels, and extracts the
/// limit object. The fixed point of each level is unique, so different
/// starts land on the same schedule; the uniqueness checks drive this
/// entry point with perturbed iterates.
pub fn run_schedule_from(
    ops: &OperatorSet,
    q: f64,
    schedule: &[u64],
    tol: f64,
    max_outer: usize,
    u0: &GridFunction,
) -> Result<SingularRun> {
    check_q(q)?;
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("schedule must contain at least one level".into()));
    }
    for w in schedule.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(format!(
                "schedule must increase strictly, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    u0.check_len(&ops.mesh)?;
    let mut levels: Vec<RegularizedLevel> = Vec::with_capacity(schedule.len());
    let mut current = u0.clone();
    let mut max_defect = f64::NEG_INFINITY;
    for &n in schedule {
        let level = solve_level(ops, q, n, &current, tol, max_outer)?;
        if let Some(prev) = levels.last() {
            let mut defect = f64::NEG_INFINITY;
            for i in 0..level.u.values.len() {
                defect = defect.max(prev.u.values[i] - level.u.values[i]);
            }
            max_defect = max_defect.max(defect);
            let tolerance = 1e-8 * level.sup_norm.max(1.0);
            if defect > tolerance {
                return Err(Error::MonotonicityViolation {
                    level: n,
                    violation: defect,
                    tolerance,
                });
            }
        }
        current = level.u.clone();
        levels.push(level);
    }

    let last = levels.last().expect("schedule is nonempty");
    let limit = if q < 1.0 {
        let polished = newton_polish(ops, q, &last.u.free(&ops.mesh))?;
        let grid = GridFunction::from_free(&ops.mesh, &polished);
        let energy_sq = energy_norm_sq(ops, &grid)?;
        let lumped: f64 = (0..polished.len())
            .map(|i| {
                let w = ops.lumped_omega[i];
                if w > 0.0 {
                    w * polished[i].powf(1.0 - q)
                } else {
                    0.0
                }
            })
            .sum();
        SingularLimit {
            energy_sq,
            identity_gap: Some((energy_sq - lumped).abs()),
            sup_norm: grid.sup_norm(),
            min_interior: grid.min_omega(&ops.mesh),
            u_hat: grid,
            polished: true,
        }
    } else {
        SingularLimit {
            u_hat: last.u.clone(),
            energy_sq: last.energy_sq,
            identity_gap: None,
            sup_norm: last.sup_norm,
            min_interior: last.min_interior,
            polished: false,
        }
    };
    Ok(SingularRun {
        q,
        levels,
        limit,
        max_monotonicity_defect: if max_defect.is_finite() { max_defect } else { 0.0 },
    })
}

/// Bound report for the transformed variable w = u^{(q+1)/2}.
#[derive(Debug, Clone)]
pub struct TransformedBound {
    /// Largest η(w_n)² across the schedule.
    pub max_energy_sq: f64,
    /// The uniform bound (q+1)²/(4q) |Ω|.
    pub bound: f64,
    pub satisfied: bool,
}

/// Checks the uniform energy bound for the transformed levels; the route
/// that survives q ≥ 1 where the untransformed energies blow up.
pub fn transformed_energy_bound(ops: &OperatorSet, run: &SingularRun) -> Result<TransformedBound> {
    let q = run.q;
    let exponent = 0.5 * (q + 1.0);
    let mut max_energy = 0.0_f64;
    for level in &run.levels {
        let w = DVector::from_fn(level.u.values.len(), |i, _| {
            level.u.values[i].max(0.0).powf(exponent)
        });
        let grid = GridFunction {
            values: {
                let mut v = w;
                v[0] = 0.0;
                let last = v.len() - 1;
                v[last] = 0.0;
                v
            },
        };
        max_energy = max_energy.max(energy_norm_sq(ops, &grid)?);
    }
    let bound = (q + 1.0) * (q + 1.0) / (4.0 * q) * ops.mesh.spec.omega_length();
    Ok(TransformedBound {
        max_energy_sq: max_energy,
        bound,
        satisfied: max_energy <= bound * (1.0 + 1e-9),
    })
}

/// The elementary inequality behind the transformed bound:
/// (x - y)(x^α - y^α) ≥ 4α/(α+1)² (x^{(α+1)/2} - y^{(α+1)/2})².
pub fn algebraic_inequality_check(x: f64, y: f64, alpha: f64) -> bool {
    if x < 0.0 || y < 0.0 || !(alpha > 0.0) {
        return false;
    }
    let lhs = (x - y) * (x.powf(alpha) - y.powf(alpha));
    let half = 0.5 * (alpha + 1.0);
    let d = x.powf(half) - y.powf(half);
    let rhs = 4.0 * alpha / ((alpha + 1.0) * (alpha + 1.0)) * d * d;
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    lhs >= rhs - 1e-12 * scale
}

/// Outcome of the discrete comparison test between a subsolution-like u
/// and supersolution-like v for the level-free singular equation.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// min over weighted free nodes of (residual of v - residual of u).
    pub hypothesis_margin: f64,
    /// min over all nodes of v - u.
    pub conclusion_margin: f64,
    pub ordered: bool,
}

/// Evaluates the comparison structure: if A v - w v^{-q} ≥ A u - w u^{-q}
/// componentwise then v ≥ u nodally. Both functions must be positive on Ω.
pub fn comparison_check(
    ops: &OperatorSet,
    u: &GridFunction,
    v: &GridFunction,
    q: f64,
    tol: f64,
) -> Result<ComparisonReport> {
    check_q(q)?;
    u.check_len(&ops.mesh)?;
    v.check_len(&ops.mesh)?;
    let uf = u.free(&ops.mesh);
    let vf = v.free(&ops.mesh);
    for i in 0..uf.len() {
        if ops.lumped_omega[i] > 0.0 && (uf[i] <= 0.0 || vf[i] <= 0.0) {
            return Err(Error::InvalidParameter(
                "comparison requires positivity on Ω nodes".into(),
            ));
        }
    }
    let res = |f: &DVector<f64>| -> DVector<f64> {
        let rhs = DVector::from_fn(f.len(), |i, _| {
            let w = ops.lumped_omega[i];
            if w > 0.0 {
                w * f[i].powf(-q)
            } else {
                0.0
            }
        });
        &ops.a_total * f - rhs
    };
    let ru = res(&uf);
    let rv = res(&vf);
    let mut hypothesis = f64::INFINITY;
    for i in 0..uf.len() {
        hypothesis = hypothesis.min(rv[i] - ru[i]);
    }
    let mut conclusion = f64::INFINITY;
    for i in 0..u.values.len() {
        conclusion = conclusion.min(v.values[i] - u.values[i]);
    }
    Ok(ComparisonReport {
        hypothesis_margin: hypothesis,
        conclusion_margin: conclusion,
        ordered: hypothesis >= -tol && conclusion >= -tol,
    })
}
