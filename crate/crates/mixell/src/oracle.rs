//! Reference computations along an independent path.
//!
//! Everything here avoids the analytic shortcuts of the assembly module:
//! singular integrals are done by geometrically graded panel quadrature on
//! global hat evaluations, eigenvalues by dense factorizations of the full
//! pencil. The `verify` subcommand replays these cross-checks at run time,
//! and the test suite freezes values produced here. Slow by design; keep
//! the meshes small.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::domain::{DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::quad::GaussRule;

/// Panels per dyadic level for the graded rules.
const SAME_LEVELS: usize = 220;
const CORNER_LEVELS: usize = 40;

fn gauss() -> GaussRule {
    GaussRule::legendre(12)
}

/// ∫∫_{E×E} f(x,y) |x-y|^{-(1+2s)} dy dx for one element, reduced to the
/// diagonal distance t = x - y and integrated on dyadically shrinking
/// panels toward t = 0. Requires f symmetric with f(x,x) = 0 quadratically,
/// which holds for products of hat differences.
fn same_element(rule: &GaussRule, x0: f64, x1: f64, s: f64, f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let h = x1 - x0;
    let mut acc = 0.0;
    for level in 0..SAME_LEVELS {
        let t_hi = h * 0.5_f64.powi(level as i32);
        let t_lo = 0.5 * t_hi;
        acc += rule.integrate(t_lo, t_hi, &mut |t: f64| {
            let inner = rule.integrate(x0 + t, x1, &mut |x| f(x, x - t));
            2.0 * inner * t.powf(-1.0 - 2.0 * s)
        });
    }
    acc
}

/// Ordered pair integral over E×F for adjacent elements sharing the node
/// x1 = y0, graded from both sides of the shared corner.
fn adjacent_elements(
    rule: &GaussRule,
    x0: f64,
    x1: f64,
    y1: f64,
    s: f64,
    f: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    let hx = x1 - x0;
    let hy = y1 - x1;
    let mut acc = 0.0;
    for lx in 0..CORNER_LEVELS {
        let dx_hi = hx * 0.5_f64.powi(lx as i32);
        let dx_lo = 0.5 * dx_hi;
        for ly in 0..CORNER_LEVELS {
            let dy_hi = hy * 0.5_f64.powi(ly as i32);
            let dy_lo = 0.5 * dy_hi;
            acc += rule.integrate(x1 - dx_hi, x1 - dx_lo, &mut |x| {
                rule.integrate(x1 + dy_lo, x1 + dy_hi, &mut |y| {
                    f(x, y) * (y - x).powf(-1.0 - 2.0 * s)
                })
            });
        }
    }
    acc
}

/// Ordered pair integral for elements separated by a positive gap,
/// tensor Gauss on a 4×4 panel split.
fn separated_elements(
    rule: &GaussRule,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    s: f64,
    f: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    let mut acc = 0.0;
    let nx = 4;
    for px in 0..nx {
        let ax = x0 + (x1 - x0) * px as f64 / nx as f64;
        let bx = x0 + (x1 - x0) * (px + 1) as f64 / nx as f64;
        for py in 0..nx {
            let ay = y0 + (y1 - y0) * py as f64 / nx as f64;
            let by = y0 + (y1 - y0) * (py + 1) as f64 / nx as f64;
            acc += rule.integrate(ax, bx, &mut |x| {
                rule.integrate(ay, by, &mut |y| f(x, y) * (y - x).powf(-1.0 - 2.0 * s))
            });
        }
    }
    acc
}

/// ∫_Ω g(x) w_D(x) dx where w_D is the Dirichlet tail weight, with grading
/// toward x = a where the weight blows up.
fn omega_tail_integral(mesh: &Mesh, g: &dyn Fn(f64) -> f64) -> f64 {
    let rule = gauss();
    let spec = &mesh.spec;
    let weight = |x: f64| crate::domain::dirichlet_tail_weight(spec, x);
    let mut acc = 0.0;
    for k in 0..mesh.n_omega_elements {
        let x0 = mesh.nodes[k];
        let x1 = mesh.nodes[k + 1];
        if k == 0 {
            for level in 0..SAME_LEVELS {
                let d_hi = (x1 - x0) * 0.5_f64.powi(level as i32);
                let d_lo = 0.5 * d_hi;
                acc += rule.integrate(x0 + d_lo, x0 + d_hi, &mut |x| g(x) * weight(x));
            }
        } else {
            acc += rule.integrate(x0, x1, &mut |x| g(x) * weight(x));
        }
    }
    acc
}

/// Brute-force single-sided tail weight ∫_{y < a} |x-y|^{-(1+2s)} dy plus
/// the mirrored side, by geometric panels running far into the exterior.
pub fn tail_weight_bruteforce(spec: &DomainSpec, x: f64) -> f64 {
    let rule = gauss();
    let kernel = |t: f64| t.powf(-1.0 - 2.0 * spec.s);
    // The neglected tail past d 2^L is 2^{-2sL} relative, so small
    // exponents need a long ladder: L = 160 keeps it below 1e-14 down
    // to s = 0.15.
    let one_side = |d: f64| {
        let mut acc = 0.0;
        for level in 0..160 {
            let lo = d * 2.0_f64.powi(level);
            acc += rule.integrate(lo, 2.0 * lo, &mut |t| kernel(t));
        }
        acc
    };
    spec.kernel_constant * (one_side(x - spec.a) + one_side(spec.window_end() - x))
}

/// Whether hat `node` is identically zero on element `k`.
fn hat_misses_element(node: usize, k: usize) -> bool {
    k + 1 < node || k > node
}

/// One entry of the Gagliardo matrix (including the Dirichlet tail) by
/// quadrature only: `a_nl[i][j]` for free indices i, j.
pub fn gagliardo_entry_bruteforce(mesh: &Mesh, free_i: usize, free_j: usize) -> f64 {
    let rule = gauss();
    let ni = mesh.node_of_free[free_i];
    let nj = mesh.node_of_free[free_j];
    let s = mesh.spec.s;
    let f = |x: f64, y: f64| {
        (mesh.hat(ni, x) - mesh.hat(ni, y)) * (mesh.hat(nj, x) - mesh.hat(nj, y))
    };
    let mut acc = 0.0;
    for k in 0..mesh.n_elements {
        for l in k..mesh.n_elements {
            if !mesh.element_in_omega(k) && !mesh.element_in_omega(l) {
                continue;
            }
            // The pair contributes only if each hat is alive on x-side or y-side.
            let i_dead = hat_misses_element(ni, k) && hat_misses_element(ni, l);
            let j_dead = hat_misses_element(nj, k) && hat_misses_element(nj, l);
            if i_dead || j_dead {
                continue;
            }
            let (x0, x1) = (mesh.nodes[k], mesh.nodes[k + 1]);
            let (y0, y1) = (mesh.nodes[l], mesh.nodes[l + 1]);
            let ordered = if l == k {
                same_element(&rule, x0, x1, s, &f)
            } else if l == k + 1 {
                adjacent_elements(&rule, x0, x1, y1, s, &f)
            } else {
                separated_elements(&rule, x0, x1, y0, y1, s, &f)
            };
            acc += if l == k { ordered } else { 2.0 * ordered };
        }
    }
    let tail = omega_tail_integral(mesh, &|x| mesh.hat(ni, x) * mesh.hat(nj, x));
    mesh.spec.kernel_constant * acc + 2.0 * tail
}

/// Full quadratic form u'A_nl u by quadrature, for a grid function.
pub fn gagliardo_energy_bruteforce(mesh: &Mesh, u: &GridFunction) -> f64 {
    let rule = gauss();
    let s = mesh.spec.s;
    let f = |x: f64, y: f64| {
        let d = u.eval(mesh, x) - u.eval(mesh, y);
        d * d
    };
    let mut acc = 0.0;
    for k in 0..mesh.n_elements {
        for l in k..mesh.n_elements {
            if !mesh.element_in_omega(k) && !mesh.element_in_omega(l) {
                continue;
            }
            let (x0, x1) = (mesh.nodes[k], mesh.nodes[k + 1]);
            let (y0, y1) = (mesh.nodes[l], mesh.nodes[l + 1]);
            let ordered = if l == k {
                same_element(&rule, x0, x1, s, &f)
            } else if l == k + 1 {
                adjacent_elements(&rule, x0, x1, y1, s, &f)
            } else {
                separated_elements(&rule, x0, x1, y0, y1, s, &f)
            };
            acc += if l == k { ordered } else { 2.0 * ordered };
        }
    }
    let tail = omega_tail_integral(mesh, &|x| {
        let v = u.eval(mesh, x);
        v * v
    });
    mesh.spec.kernel_constant * acc + 2.0 * tail
}

/// κ ∫_Ω (u(x) - u(y)) |x-y|^{-(1+2s)} dy for x in the collar interior.
/// Integrated element by element (the interpolant kinks at the nodes),
/// each element split dyadically toward its right end where the kernel
/// peaks.
pub fn neumann_derivative_bruteforce(mesh: &Mesh, u: &GridFunction, x: f64) -> f64 {
    let rule = gauss();
    let spec = &mesh.spec;
    let ux = u.eval(mesh, x);
    let integrand =
        |y: f64| (ux - u.eval(mesh, y)) * (x - y).powf(-1.0 - 2.0 * spec.s);
    let mut acc = 0.0;
    for k in 0..mesh.n_omega_elements {
        let y0 = mesh.nodes[k];
        let y1 = mesh.nodes[k + 1];
        let mut hi = y1;
        let mut width = (x - y1).min(y1 - y0);
        loop {
            let lo = (hi - width).max(y0);
            acc += rule.integrate(lo, hi, &mut |y| integrand(y));
            if lo <= y0 {
                break;
            }
            hi = lo;
            width *= 2.0;
        }
    }
    spec.kernel_constant * acc
}

/// Smallest eigenvalue and eigenvector of A v = λ M v for symmetric
/// positive definite A and symmetric positive semidefinite M with M ≠ 0,
/// through the inverted pencil: with A = LL', the largest eigenvalue μ of
/// L⁻¹ M L⁻' gives λ = 1/μ and v = L⁻' w.
pub fn dense_smallest_eigenpair(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("stiffness matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("Cholesky factor is singular".into()))?;
    let b = &linv * m * linv.transpose();
    let sym = SymmetricEigen::new(0.5 * (&b + b.transpose()));
    let mut best = 0;
    for i in 0..sym.eigenvalues.len() {
        if sym.eigenvalues[i] > sym.eigenvalues[best] {
            best = i;
        }
    }
    let mu = sym.eigenvalues[best];
    if mu <= 0.0 {
        return Err(Error::InvalidParameter(
            "mass matrix has no positive direction".into(),
        ));
    }
    let w = sym.eigenvectors.column(best).into_owned();
    let v = linv.transpose() * w;
    Ok((1.0 / mu, v))
}
