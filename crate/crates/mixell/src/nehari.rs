//! Two solutions of ℒu = λ u^{-q} + u^p through the Nehari manifold.
//!
//! With M(u) = ∫_Ω |u|^{1-q} and N(u) = ∫_Ω |u|^{p+1} (both lumped), the
//! energy is 𝒥(u) = ½η(u)² - λM(u)/(1-q) - N(u)/(p+1) and the fiber map
//! Φ_u(t) = 𝒥(tu) is controlled by μ_u(t) = t^{1+q}η(u)² - t^{p+q}N(u):
//! stationary points of Φ_u solve μ_u(t) = λ(1-...no: μ_u(t) = λ M(u)·(1+q
//! factors folded in), and μ_u rises to a single hump at
//! t_max = ((1+q)η²/((p+q)N))^{1/(p-1)} then falls. Below the hump value
//! the line λM cuts the graph twice: t⁻ < t_max < t⁺, a local minimum and
//! a local maximum of Φ_u on the ray, the discrete trace of the manifold
//! splitting into 𝒩⁻ and 𝒩⁺.
//!
//! The plus branch is found by minimizing u ↦ Φ_u(t⁻(u)) (projection then
//! descent), the minus branch likewise with t⁺; both finish with a damped
//! Newton iteration on the Euler-Lagrange system, the singular power
//! evaluated above a positive barrier so that intermediate iterates cannot
//! take the nonlinearity to infinity. The barrier itself is a subsolution
//! multiple of the ground state, capped by the constant (λq/p)^{1/(p+q)}
//! and small enough that λβ^{-q}φ₁ dominates the eigenvalue term.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elliptic::EigenPair;
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::operators::{energy_norm_sq, lumped_abs_power, OperatorSet};

/// Parameters of the perturbed problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedParams {
    pub lambda: f64,
    pub q: f64,
    pub p: f64,
}

impl PerturbedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbed problem needs 0 < q < 1, got q = {}",
                self.q
            )));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "superlinear exponent needs p > 1, got p = {}",
                self.p
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "perturbation weight needs λ > 0, got λ = {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// 𝒥_λ(u) with lumped nonlinear integrals.
pub fn j_lambda(ops: &OperatorSet, params: &PerturbedParams, u: &GridFunction) -> Result<f64> {
    params.validate()?;
    let energy = energy_norm_sq(ops, u)?;
    let free = u.free(&ops.mesh);
    let m = lumped_abs_power(ops, &free, 1.0 - params.q);
    let n = lumped_abs_power(ops, &free, params.p + 1.0);
    Ok(0.5 * energy - params.lambda * m / (1.0 - params.q) - n / (params.p + 1.0))
}

/// Scale-invariant hump data of one ray, defined for every nonzero u.
#[derive(Debug, Clone, Copy)]
pub struct FiberHump {
    pub eta_sq: f64,
    pub m_int: f64,
    pub n_int: f64,
    pub t_max: f64,
    /// Hump height μ_u(t_max), to be compared with λ m_int.
    pub mu_peak: f64,
    /// The line level λ m_int the hump is cut by.
    pub level: f64,
}

impl FiberHump {
    /// True when λ m_int clears the hump and no stationary pair exists.
    pub fn degenerate(&self) -> bool {
        self.level >= self.mu_peak
    }
}

/// Everything the fiber map of a nondegenerate ray knows.
#[derive(Debug, Clone)]
pub struct FiberMapReport {
    pub eta_sq: f64,
    pub m_int: f64,
    pub n_int: f64,
    pub t_max: f64,
    pub mu_peak: f64,
    pub level: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub j_minus: f64,
    pub j_plus: f64,
    /// Φ_u'' at the two roots; the minus root must curve up, the plus down.
    pub curvature_minus: f64,
    pub curvature_plus: f64,
}

/// The hump of μ_u(t) = t^{1+q} η(u)² - t^{p+q} N(u) against the line
/// λ M(u), without committing to the existence of stationary points.
pub fn fiber_hump(
    ops: &OperatorSet,
    params: &PerturbedParams,
    u: &GridFunction,
) -> Result<FiberHump> {
    params.validate()?;
    let eta_sq = energy_norm_sq(ops, u)?;
    let free = u.free(&ops.mesh);
    let m_int = lumped_abs_power(ops, &free, 1.0 - params.q);
    let n_int = lumped_abs_power(ops, &free, params.p + 1.0);
    if !(eta_sq > 0.0) || !(m_int > 0.0) || !(n_int > 0.0) {
        return Err(Error::InvalidParameter(
            "fiber analysis needs a ray with positive energy and mass".into(),
        ));
    }
    let (q, p) = (params.q, params.p);
    let t_max = ((1.0 + q) * eta_sq / ((p + q) * n_int)).powf(1.0 / (p - 1.0));
    let mu_peak = t_max.powf(1.0 + q) * eta_sq - t_max.powf(p + q) * n_int;
    Ok(FiberHump {
        eta_sq,
        m_int,
        n_int,
        t_max,
        mu_peak,
        level: params.lambda * m_int,
    })
}

/// μ_u(t) and the objects derived from it for the ray through u. Fails
/// when the line clears the hump, because then the fiber map has no two
/// critical points and the ray meets neither branch.
pub fn fiber_analyze(
    ops: &OperatorSet,
    params: &PerturbedParams,
    u: &GridFunction,
) -> Result<FiberMapReport> {
    let hump = fiber_hump(ops, params, u)?;
    if hump.degenerate() {
        return Err(Error::ProjectionFailure(format!(
            "no two critical points: λ M(u) = {:.6e} does not pass under the hump μ_u(t_max) = {:.6e}",
            hump.level, hump.mu_peak
        )));
    }
    let FiberHump {
        eta_sq,
        m_int,
        n_int,
        t_max,
        mu_peak,
        level,
    } = hump;
    let (q, p, lambda) = (params.q, params.p, params.lambda);
    let mu = |t: f64| t.powf(1.0 + q) * eta_sq - t.powf(p + q) * n_int;
    let phi = |t: f64| {
        0.5 * t * t * eta_sq
            - lambda * t.powf(1.0 - q) * m_int / (1.0 - q)
            - t.powf(p + 1.0) * n_int / (p + 1.0)
    };
    let phi2 = |t: f64| {
        eta_sq + lambda * q * t.powf(-q - 1.0) * m_int - p * t.powf(p - 1.0) * n_int
    };
    // μ is strictly increasing on (0, t_max) and strictly decreasing after,
    // so each side holds exactly one root of μ(t) = level.
    let t_minus = bisect_root(&mu, level, 0.0, t_max, true);
    let mut hi = 2.0 * t_max;
    while mu(hi) > level {
        hi *= 2.0;
    }
    let t_plus = bisect_root(&mu, level, t_max, hi, false);
    Ok(FiberMapReport {
        eta_sq,
        m_int,
        n_int,
        t_max,
        mu_peak,
        level,
        t_minus,
        t_plus,
        j_minus: phi(t_minus),
        j_plus: phi(t_plus),
        curvature_minus: phi2(t_minus),
        curvature_plus: phi2(t_plus),
    })
}

/// Root of mu(t) = level on a bracket where mu crosses once; `rising`
/// selects the orientation of the bracket update.
fn bisect_root(mu: &dyn Fn(f64) -> f64, level: f64, mut lo: f64, mut hi: f64, rising: bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let above = mu(mid) > level;
        if above == rising {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-16 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form threshold λ* below which every ray's hump clears its line:
/// λ* = ((p-1)/(p+q)) ((1+q)/(p+q))^{(1+q)/(p-1)} C_{p+1}^{-(1+q)/(p-1)} C_{1-q}^{-1},
/// where C_α = sup { ∫_Ω |v|^α : η(v) = 1 }.
#[derive(Debug, Clone)]
pub struct LambdaStarReport {
    pub lambda_star: f64,
    pub c_p1: f64,
    pub c_1mq: f64,
    pub per_start_p1: Vec<f64>,
    pub per_start_1mq: Vec<f64>,
}

/// Maximizes the lumped α-mass on the energy sphere by the KKT fixed point,
/// one independent run per seed, merged by best value.
fn sphere_maximum(
    ops: &OperatorSet,
    alpha: f64,
    seeds: &[u64],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "sphere maximization needs at least one seed".into(),
        ));
    }
    let n = ops.a_total.nrows();
    let chol = ops
        .a_total
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("energy matrix is not positive definite".into()))?;
    let mut per_start = Vec::with_capacity(seeds.len());
    let mut best = f64::NEG_INFINITY;
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DVector::from_fn(n, |_, _| rng.random_range(0.05..1.0));
        let e = (&ops.a_total * &v).dot(&v);
        v /= e.sqrt();
        let mut value = lumped_abs_power(ops, &v, alpha);
        let mut flat = 0usize;
        for _ in 0..max_iter {
            // KKT fixed point: the maximizer satisfies A v ∝ w |v|^{α-1}
            // sgn v, so solve for the preimage and renormalize. The map
            // preserves the positive cone and climbs the objective.
            let g = DVector::from_fn(n, |i, _| {
                let w = ops.lumped_omega[i];
                if w > 0.0 && v[i] != 0.0 {
                    w * v[i].abs().powf(alpha - 1.0) * v[i].signum()
                } else {
                    0.0
                }
            });
            let mut u = chol.solve(&g);
            let e = (&ops.a_total * &u).dot(&u);
            if !(e > 0.0) {
                break;
            }
            u /= e.sqrt();
            let new_value = lumped_abs_power(ops, &u, alpha);
            v = u;
            let gain = (new_value - value).abs();
            value = new_value;
            if gain <= tol * value.max(1e-300) {
                flat += 1;
                if flat >= 4 {
                    break;
                }
            } else {
                flat = 0;
            }
        }
        per_start.push(value);
        best = best.max(value);
    }
    Ok((best, per_start))
}

pub fn lambda_star(
    ops: &OperatorSet,
    q: f64,
    p: f64,
    seeds: &[u64],
    tol: f64,
    max_iter: usize,
) -> Result<LambdaStarReport> {
    PerturbedParams { lambda: 1.0, q, p }.validate()?;
    let shifted: Vec<u64> = seeds.iter().map(|s| s ^ 0x9e37_79b9_7f4a_7c15).collect();
    let (c_p1, per_start_p1) = sphere_maximum(ops, p + 1.0, seeds, tol, max_iter)?;
    let (c_1mq, per_start_1mq) = sphere_maximum(ops, 1.0 - q, &shifted, tol, max_iter)?;
    let lambda_star = (p - 1.0) / (p + q)
        * ((1.0 + q) / (p + q)).powf((1.0 + q) / (p - 1.0))
        * c_p1.powf(-(1.0 + q) / (p - 1.0))
        / c_1mq;
    Ok(LambdaStarReport {
        lambda_star,
        c_p1,
        c_1mq,
        per_start_p1,
        per_start_1mq,
    })
}

/// Positive barrier below every positive solution.
#[derive(Debug, Clone)]
pub struct BarrierReport {
    pub beta: f64,
    /// The cap (λq/p)^{1/(p+q)} from balancing the two right-hand powers.
    pub beta_cap: f64,
    /// The eigenvalue constraint (λ/λ₁)^{1/(1+q)} scaled just below.
    pub beta_eigen: f64,
    pub floor: GridFunction,
}

/// Builds the subsolution β φ₁: for β below both the cap and the
/// eigenvalue constraint, ℒ(βφ₁) = λ₁βφ₁ ≤ λ(βφ₁)^{-q} holds pointwise,
/// so every positive supersolution of the perturbed equation sits above.
pub fn barrier(params: &PerturbedParams, eigen: &EigenPair) -> Result<BarrierReport> {
    params.validate()?;
    if !(eigen.lambda > 0.0) {
        return Err(Error::InvalidParameter("barrier needs a positive eigenvalue".into()));
    }
    let beta_cap = (params.lambda * params.q / params.p).powf(1.0 / (params.p + params.q));
    let beta_eigen =
        (params.lambda / (eigen.lambda * (1.0 + 1e-3))).powf(1.0 / (1.0 + params.q));
    let beta = beta_cap.min(beta_eigen);
    let mut floor = eigen.phi.clone();
    floor.values *= beta;
    Ok(BarrierReport {
        beta,
        beta_cap,
        beta_eigen,
        floor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// One accepted iterate of the constrained descent, recorded on the
/// manifold (after fiber projection), for the coercivity ledger.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPoint {
    pub j: f64,
    pub eta_sq: f64,
    pub m_int: f64,
}

/// One found critical point with its certificates.
#[derive(Debug, Clone)]
pub struct NehariSolution {
    pub u: GridFunction,
    pub branch: Branch,
    pub j_value: f64,
    /// Euler-Lagrange residual ‖Au - λ w u^{-q} - w u^p‖ relative to ‖Au‖.
    pub residual: f64,
    /// Fiber data of the ray through the solution; t at the solution is 1.
    pub fiber: FiberMapReport,
    /// The projected iterates of the descent phase, ending at the solution.
    pub trajectory: Vec<TrajectoryPoint>,
}

/// The pair with its separation in the energy norm.
#[derive(Debug, Clone)]
pub struct NehariPair {
    pub minus: NehariSolution,
    pub plus: NehariSolution,
    pub separation: f64,
}

fn euler_lagrange(
    ops: &OperatorSet,
    params: &PerturbedParams,
    z: &DVector<f64>,
    floor: &DVector<f64>,
) -> DVector<f64> {
    let rhs = DVector::from_fn(z.len(), |i, _| {
        let w = ops.lumped_omega[i];
        if w > 0.0 {
            let zi = z[i].max(floor[i]);
            w * (params.lambda * zi.powf(-params.q) + z[i].max(0.0).powf(params.p))
        } else {
            0.0
        }
    });
    &ops.a_total * z - rhs
}

/// Minimizes Φ_w(t_branch(w)) over rays by projected descent, then drives
/// the Euler-Lagrange system to zero with damped Newton. The barrier floor
/// caps the singular power during the iteration; at the end the solution is
/// checked to sit strictly above the floor, so the cap is inactive.
pub fn minimize_nehari(
    ops: &OperatorSet,
    params: &PerturbedParams,
    eigen: &EigenPair,
    branch: Branch,
    seeds: &[u64],
    tol: f64,
    max_iter: usize,
) -> Result<NehariSolution> {
    params.validate()?;
    let bar = barrier(params, eigen)?;
    let floor_grid = &bar.floor;
    let floor_half = floor_grid.free(&ops.mesh) * 0.5;
    let n = ops.a_total.nrows();
    let mut starts: Vec<DVector<f64>> = vec![eigen.phi.free(&ops.mesh)];
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        starts.push(DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0)));
    }

    let mut round_errors: Vec<Error> = Vec::new();
    for start in starts {
        match descend_one_start(
            ops, params, branch, &floor_half, start, tol, max_iter,
        ) {
            Ok(solution) => return Ok(solution),
            Err(e) => round_errors.push(e),
        }
    }
    Err(round_errors.pop().unwrap_or(Error::ProjectionFailure(
        "no start produced a critical point".into(),
    )))
}

/// Projects the ray through w onto the requested branch: the projected
/// point is t w, its energy value j, and the manifold record carries
/// η(tw)² = t² η(w)² and M(tw) = t^{1-q} M(w).
fn project_to_branch(
    ops: &OperatorSet,
    params: &PerturbedParams,
    branch: Branch,
    w: &DVector<f64>,
) -> Result<(f64, f64, TrajectoryPoint)> {
    let grid = GridFunction::from_free(&ops.mesh, w);
    let fiber = fiber_analyze(ops, params, &grid)?;
    let (t, j) = match branch {
        Branch::Plus => (fiber.t_minus, fiber.j_minus),
        Branch::Minus => (fiber.t_plus, fiber.j_plus),
    };
    let point = TrajectoryPoint {
        j,
        eta_sq: t * t * fiber.eta_sq,
        m_int: t.powf(1.0 - params.q) * fiber.m_int,
    };
    Ok((t, j, point))
}

fn descend_one_start(
    ops: &OperatorSet,
    params: &PerturbedParams,
    branch: Branch,
    floor_half: &DVector<f64>,
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NehariSolution> {
    let mut w = start;
    for x in w.iter_mut() {
        *x = x.abs();
    }
    let sup = w.amax();
    if !(sup > 0.0) {
        return Err(Error::ProjectionFailure("zero start".into()));
    }
    w /= sup;
    let (mut t, mut value, first) = project_to_branch(ops, params, branch, &w)?;
    let mut trajectory = vec![first];
    let mut step = 1.0 / ops.a_total.amax();

    // Phase one: descent in the ray variable. The envelope theorem gives
    // ∇_w Φ_w(t(w)) = t ∇𝒥(t w), since ∂Φ/∂t vanishes on the branch.
    for _ in 0..max_iter {
        let z = t * &w;
        let grad = t * euler_lagrange(ops, params, &z, floor_half);
        let mut accepted = false;
        for _ in 0..50 {
            let mut trial = &w - step * &grad;
            for x in trial.iter_mut() {
                *x = x.abs();
            }
            let sup = trial.amax();
            if sup > 0.0 {
                trial /= sup;
                if let Ok((t_trial, v_trial, point)) = project_to_branch(ops, params, branch, &trial)
                {
                    if v_trial < value - 1e-300 {
                        let gain = value - v_trial;
                        w = trial;
                        t = t_trial;
                        value = v_trial;
                        trajectory.push(point);
                        step *= 1.4;
                        accepted = true;
                        if gain <= 1e-13 * value.abs().max(1e-6) {
                            accepted = false; // flat: hand over to Newton
                        }
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // Phase two: damped Newton on the Euler-Lagrange system from z = t w.
    let mut z = t * &w;
    let mut fval = euler_lagrange(ops, params, &z, floor_half);
    let scale = (&ops.a_total * &z).norm().max(1e-300);
    let mut residual = fval.norm() / scale;
    for _ in 0..200 {
        if residual <= tol {
            break;
        }
        let mut jac = ops.a_total.clone();
        for i in 0..z.len() {
            let wgt = ops.lumped_omega[i];
            if wgt > 0.0 {
                let zi = z[i].max(floor_half[i]);
                let singular_slope = if z[i] > floor_half[i] {
                    -params.q * params.lambda * zi.powf(-params.q - 1.0)
                } else {
                    0.0
                };
                let power_slope = params.p * z[i].max(0.0).powf(params.p - 1.0);
                jac[(i, i)] -= wgt * (singular_slope + power_slope);
            }
        }
        let lu = jac.lu();
        let Some(delta) = lu.solve(&(-&fval)) else {
            return Err(Error::NoConvergence {
                what: "Nehari Newton step",
                iterations: trajectory.len(),
                residual,
            });
        };
        let mut tau = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let trial = &z + tau * &delta;
            let ftrial = euler_lagrange(ops, params, &trial, floor_half);
            if ftrial.norm() < fval.norm() {
                z = trial;
                fval = ftrial;
                moved = true;
                break;
            }
            tau *= 0.5;
        }
        if !moved {
            break;
        }
        let scale = (&ops.a_total * &z).norm().max(1e-300);
        residual = fval.norm() / scale;
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            what: "Nehari refinement",
            iterations: trajectory.len(),
            residual,
        });
    }

    // Certificates: the solution must clear the barrier cap (so the floored
    // power never acted) and sit on the right branch of its own fiber map.
    for i in 0..z.len() {
        if ops.lumped_omega[i] > 0.0 && z[i] <= floor_half[i] {
            return Err(Error::ProjectionFailure(
                "refined solution fell below the barrier floor".into(),
            ));
        }
    }
    let grid = GridFunction::from_free(&ops.mesh, &z);
    let fiber = fiber_analyze(ops, params, &grid)?;
    let t_here = match branch {
        Branch::Plus => fiber.t_minus,
        Branch::Minus => fiber.t_plus,
    };
    if (t_here - 1.0).abs() > 1e-8 {
        return Err(Error::ProjectionFailure(format!(
            "refined point is not on the requested branch (t = {t_here})"
        )));
    }
    let j_value = j_lambda(ops, params, &grid)?;
    trajectory.push(TrajectoryPoint {
        j: j_value,
        eta_sq: fiber.eta_sq,
        m_int: fiber.m_int,
    });
    Ok(NehariSolution {
        u: grid,
        branch,
        j_value,
        residual,
        fiber,
        trajectory,
    })
}

/// Finds both branches from the same seeds and reports their separation.
pub fn solve_pair(
    ops: &OperatorSet,
    params: &PerturbedParams,
    eigen: &EigenPair,
    seeds: &[u64],
    tol: f64,
    max_iter: usize,
) -> Result<NehariPair> {
    let plus = minimize_nehari(ops, params, eigen, Branch::Plus, seeds, tol, max_iter)?;
    let minus = minimize_nehari(ops, params, eigen, Branch::Minus, seeds, tol, max_iter)?;
    let diff = GridFunction {
        values: &minus.u.values - &plus.u.values,
    };
    let separation = energy_norm_sq(ops, &diff)?.max(0.0).sqrt();
    Ok(NehariPair {
        minus,
        plus,
        separation,
    })
}

/// Closed-form threshold for the finiteness of the extremal parameter:
/// μ* = (p-1)/(1+q) t₀^{p+q} with t₀ = (c(1+q)/(p+q))^{1/(p-1)} and
/// c = λ₁(1 + ε) is the smallest μ with μ t^{-q} + t^p > c t for all
/// t > 0. Testing the equation against φ₁ shows no positive solution
/// survives past λ = μ*.
#[derive(Debug, Clone, Copy)]
pub struct WitnessThreshold {
    pub mu_star: f64,
    pub t_touch: f64,
    pub c: f64,
    pub epsilon: f64,
}

pub fn witness_threshold(q: f64, p: f64, lambda1: f64) -> Result<WitnessThreshold> {
    PerturbedParams { lambda: 1.0, q, p }.validate()?;
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidParameter("witness needs a positive eigenvalue".into()));
    }
    let epsilon = 0.01 * lambda1;
    let c = lambda1 + epsilon;
    let t_touch = (c * (1.0 + q) / (p + q)).powf(1.0 / (p - 1.0));
    let mu_star = (p - 1.0) / (1.0 + q) * t_touch.powf(p + q);
    Ok(WitnessThreshold {
        mu_star,
        t_touch,
        c,
        epsilon,
    })
}

/// The numerical nonexistence witness: both branch searches are attempted
/// at λ = 2μ* and are expected to fail. A surviving solution is reported
/// in `confirmed`, never thrown.
#[derive(Debug, Clone)]
pub struct FinitenessWitness {
    pub threshold: WitnessThreshold,
    pub lambda_tested: f64,
    pub confirmed: bool,
    pub detail: String,
}

pub fn lambda_finiteness_witness(
    ops: &OperatorSet,
    q: f64,
    p: f64,
    eigen: &EigenPair,
    seeds: &[u64],
    tol: f64,
    max_iter: usize,
) -> Result<FinitenessWitness> {
    let threshold = witness_threshold(q, p, eigen.lambda)?;
    let lambda_tested = 2.0 * threshold.mu_star;
    let params = PerturbedParams {
        lambda: lambda_tested,
        q,
        p,
    };
    let mut detail = String::new();
    let mut confirmed = true;
    for branch in [Branch::Plus, Branch::Minus] {
        match minimize_nehari(ops, &params, eigen, branch, seeds, tol, max_iter) {
            Err(e) => {
                detail.push_str(&format!("{branch:?}: {e}\n"));
            }
            Ok(solution) => {
                confirmed = false;
                detail.push_str(&format!(
                    "{branch:?}: unexpected solution with J = {:.6e}, residual {:.3e}\n",
                    solution.j_value, solution.residual
                ));
            }
        }
    }
    Ok(FinitenessWitness {
        threshold,
        lambda_tested,
        confirmed,
        detail,
    })
}

/// Coercivity certificate along a descent trajectory: every recorded
/// manifold point obeys 𝒥 ≥ c₁ η² - c₂ λ C_{1-q} η^{1-q}, with
/// c₁ = (p-1)/(2(p+1)) and c₂ = (p+q)/((1-q)(p+1)). The bound follows
/// from Nehari membership alone, so it must hold at every iterate.
#[derive(Debug, Clone)]
pub struct CoercivityCheck {
    pub points_checked: usize,
    /// Smallest lhs - rhs over the trajectory (negative means a violation).
    pub worst_margin: f64,
    /// lhs and rhs at the worst point.
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub fn coercivity_check(
    params: &PerturbedParams,
    c_1mq: f64,
    solution: &NehariSolution,
) -> Result<CoercivityCheck> {
    params.validate()?;
    if !(c_1mq > 0.0) {
        return Err(Error::InvalidParameter(
            "coercivity check needs a positive embedding constant".into(),
        ));
    }
    let (p, q) = (params.p, params.q);
    let c1 = (p - 1.0) / (2.0 * (p + 1.0));
    let c2 = (p + q) / ((1.0 - q) * (p + 1.0));
    let mut worst_margin = f64::INFINITY;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for point in &solution.trajectory {
        let eta = point.eta_sq.max(0.0).sqrt();
        let bound = c1 * point.eta_sq - c2 * params.lambda * c_1mq * eta.powf(1.0 - q);
        let margin = point.j - bound;
        if margin < worst_margin {
            worst_margin = margin;
            lhs = point.j;
            rhs = bound;
        }
    }
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    Ok(CoercivityCheck {
        points_checked: solution.trajectory.len(),
        worst_margin,
        lhs,
        rhs,
        ok: worst_margin >= -1e-9 * scale,
    })
}
