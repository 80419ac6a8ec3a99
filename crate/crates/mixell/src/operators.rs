//! Galerkin assembly of the mixed local-nonlocal forms.
//!
//! For P1 hats on the window the bilinear forms are
//!
//! * `a_loc[i][j] = ∫_Ω φ_i' φ_j' dx` (elements of Ω only),
//! * `a_nl[i][j]  = κ ∫∫_Q (φ_i(x)-φ_i(y))(φ_j(x)-φ_j(y)) |x-y|^{-(1+2s)} dy dx`,
//! * `m_omega     = ∫_Ω φ_i φ_j dx`, `m_full = ∫_{Ω∪N} φ_i φ_j dx`,
//!
//! where Q = ℝ² minus the set of pairs with both points outside Ω. The
//! double integral therefore decomposes into ordered element pairs with at
//! least one element in Ω, plus the Dirichlet tail
//! `2 κ ∫_Ω φ_i φ_j w_D dx` with `w_D` the closed-form exterior weight
//! (both orderings of an (Ω, D) pair contribute, hence the factor 2).
//! Collar-collar element pairs are excluded: two collar hats couple only
//! through pairs with one point in Ω.
//!
//! Element pairs at distance two or more elements have a smooth kernel and
//! use tensorized Gauss-Legendre (with a panel split at distance exactly
//! two, where the kernel still varies strongly). Identical and adjacent
//! pairs are integrated exactly: the singular diagonal cancels against the
//! second-order vanishing of the hat differences, and the surviving moments
//! reduce to [`power_moment`] evaluations.

use nalgebra::{DMatrix, DVector};

use crate::domain::Mesh;
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::quad::{power_moment, GaussRule};

/// Assembled matrices for one mesh, over the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub mesh: Mesh,
    pub a_loc: DMatrix<f64>,
    pub a_nl: DMatrix<f64>,
    /// a_loc + a_nl, the full energy matrix.
    pub a_total: DMatrix<f64>,
    pub m_omega: DMatrix<f64>,
    pub m_full: DMatrix<f64>,
    /// Row sums of m_omega: weights of the nodal quadrature Σ w_i f(u_i)
    /// used for every nonlinear integral over Ω.
    pub lumped_omega: DVector<f64>,
    pub quad_order: usize,
}

/// Adds `factor * local` into the global matrix, skipping constrained nodes.
fn scatter(mat: &mut DMatrix<f64>, mesh: &Mesh, nodes: &[usize], local: &[f64], factor: f64) {
    let n = nodes.len();
    debug_assert_eq!(local.len(), n * n);
    for a in 0..n {
        let Some(ia) = mesh.free_of_node[nodes[a]] else {
            continue;
        };
        for b in 0..n {
            let Some(ib) = mesh.free_of_node[nodes[b]] else {
                continue;
            };
            mat[(ia, ib)] += factor * local[a * n + b];
        }
    }
}

/// Exact ∫∫_{E×E} |x-y|^{1-2s} dx dy for an element of width h.
fn same_element_kernel_moment(h: f64, s: f64) -> f64 {
    2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))
}

/// Exact base integrals for an adjacent element pair, in the corner frame:
/// P2 = ∫∫_{[0,h]²} u² (u+y)^{-(1+2s)} and P11 with u y in place of u².
fn adjacent_base_integrals(h: f64, s: f64) -> (f64, f64) {
    let e = -1.0 - 2.0 * s;
    let a0 = power_moment(h, 2.0 * h, e);
    let a1 = power_moment(h, 2.0 * h, e + 1.0);
    let a2 = power_moment(h, 2.0 * h, e + 2.0);
    let a3 = power_moment(h, 2.0 * h, e + 3.0);
    let near = power_moment(0.0, h, 2.0 - 2.0 * s);
    let h2 = h * h;
    let h3 = h2 * h;
    let p2 = (near + 2.0 * h3 * a0 - a3 + 3.0 * h * a2 - 3.0 * h2 * a1) / 3.0;
    let p11 = near / 6.0 - a3 / 6.0 + h2 * a1 - 2.0 / 3.0 * h3 * a0;
    (p2, p11)
}

/// Σ_m c_m ∫_lo^hi t^{e+m} dt for a quadratic with coefficients c, skipping
/// exact zeros so that divergent moments multiplied by zero never evaluate.
fn poly_moment(c: &[f64; 3], lo: f64, hi: f64, e: f64) -> f64 {
    let mut acc = 0.0;
    for (m, &cm) in c.iter().enumerate() {
        if cm != 0.0 {
            acc += cm * power_moment(lo, hi, e + m as f64);
        }
    }
    acc
}

pub fn assemble(mesh: &Mesh, quad_order: usize) -> Result<OperatorSet> {
    if quad_order < 2 {
        return Err(Error::InvalidParameter(format!(
            "quadrature order must be at least 2, got {quad_order}"
        )));
    }
    let n = mesh.n_free();
    let h = mesh.h;
    let s = mesh.spec.s;
    let kappa = mesh.spec.kernel_constant;

    let mut a_loc = DMatrix::zeros(n, n);
    let mut m_omega = DMatrix::zeros(n, n);
    let mut m_full = DMatrix::zeros(n, n);

    let mass_local = [h / 3.0, h / 6.0, h / 6.0, h / 3.0];
    let stiff_local = [1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h];
    for k in 0..mesh.n_elements {
        let nodes = [k, k + 1];
        scatter(&mut m_full, mesh, &nodes, &mass_local, 1.0);
        if mesh.element_in_omega(k) {
            scatter(&mut m_omega, mesh, &nodes, &mass_local, 1.0);
            scatter(&mut a_loc, mesh, &nodes, &stiff_local, 1.0);
        }
    }

    // Nonlocal part, assembled with κ = 1 and scaled once at the end so
    // that the matrix is exactly linear in the kernel constant.
    let mut a_nl = DMatrix::zeros(n, n);
    let rule = GaussRule::legendre(quad_order);

    let v_same = same_element_kernel_moment(h, s) / (h * h);
    let same_local = [v_same, -v_same, -v_same, v_same];

    let (p2, p11) = adjacent_base_integrals(h, s);
    let (ll, lc, lr, cc) = (
        p2 / (h * h),
        (p11 - p2) / (h * h),
        -p11 / (h * h),
        2.0 * (p2 - p11) / (h * h),
    );
    let adjacent_local = [ll, lc, lr, lc, cc, lc, lr, lc, ll];

    for k in 0..mesh.n_elements {
        for l in k..mesh.n_elements {
            if !mesh.element_in_omega(k) && !mesh.element_in_omega(l) {
                continue;
            }
            match l - k {
                0 => scatter(&mut a_nl, mesh, &[k, k + 1], &same_local, 1.0),
                1 => scatter(&mut a_nl, mesh, &[k, k + 1, k + 2], &adjacent_local, 2.0),
                gap => {
                    let local = far_pair_local(mesh, &rule, k, l, if gap == 2 { 2 } else { 1 });
                    scatter(&mut a_nl, mesh, &[k, k + 1, l, l + 1], &local, 2.0);
                }
            }
        }
    }

    // Dirichlet tail: 2 ∫_Ω φ_i φ_j w_D dx with w_D expanded around each
    // exterior endpoint. Entries touching a constrained node are skipped
    // before evaluation; this also keeps the divergent moments of the
    // first element (where a hat does not vanish at x = a) out of reach.
    let two_s = 2.0 * s;
    let bw = mesh.spec.window_end();
    for k in 0..mesh.n_omega_elements {
        let x0 = mesh.nodes[k];
        let x1 = mesh.nodes[k + 1];
        let xi = [x0 - mesh.spec.a, x1 - mesh.spec.a];
        let left = [
            [(x1 - mesh.spec.a) / h, -1.0 / h],
            [-(x0 - mesh.spec.a) / h, 1.0 / h],
        ];
        let ze = [bw - x1, bw - x0];
        let right = [[-(bw - x1) / h, 1.0 / h], [(bw - x0) / h, -1.0 / h]];
        for a in 0..2 {
            let Some(ia) = mesh.free_of_node[k + a] else {
                continue;
            };
            for b in a..2 {
                let Some(ib) = mesh.free_of_node[k + b] else {
                    continue;
                };
                let prod_left = [
                    left[a][0] * left[b][0],
                    left[a][0] * left[b][1] + left[a][1] * left[b][0],
                    left[a][1] * left[b][1],
                ];
                let prod_right = [
                    right[a][0] * right[b][0],
                    right[a][0] * right[b][1] + right[a][1] * right[b][0],
                    right[a][1] * right[b][1],
                ];
                let value = (poly_moment(&prod_left, xi[0], xi[1], -two_s)
                    + poly_moment(&prod_right, ze[0], ze[1], -two_s))
                    * 2.0
                    / two_s;
                a_nl[(ia, ib)] += value;
                if ia != ib {
                    a_nl[(ib, ia)] += value;
                }
            }
        }
    }

    a_nl *= kappa;
    let a_total = &a_loc + &a_nl;
    let ones = DVector::from_element(n, 1.0);
    let lumped_omega = &m_omega * ones;

    Ok(OperatorSet {
        mesh: mesh.clone(),
        a_loc,
        a_nl,
        a_total,
        m_omega,
        m_full,
        lumped_omega,
        quad_order,
    })
}

/// Local 4×4 for two separated elements by tensor Gauss quadrature,
/// node order [k, k+1, l, l+1]. Hats from one element vanish on the other,
/// so the difference factors reduce to single-side evaluations.
fn far_pair_local(mesh: &Mesh, rule: &GaussRule, k: usize, l: usize, panels: usize) -> [f64; 16] {
    let h = mesh.h;
    let s = mesh.spec.s;
    let exponent = -(1.0 + 2.0 * s);
    let (xk, xl) = (mesh.nodes[k], mesh.nodes[l]);
    let (xk1, xl1) = (mesh.nodes[k + 1], mesh.nodes[l + 1]);
    let mut local = [0.0_f64; 16];
    let step = h / panels as f64;
    for px in 0..panels {
        let ex0 = xk + px as f64 * step;
        for py in 0..panels {
            let fy0 = xl + py as f64 * step;
            for (gx, wx) in rule.nodes.iter().zip(&rule.weights) {
                let x = ex0 + 0.5 * step * (gx + 1.0);
                let wx = wx * 0.5 * step;
                for (gy, wy) in rule.nodes.iter().zip(&rule.weights) {
                    let y = fy0 + 0.5 * step * (gy + 1.0);
                    let w = wx * wy * 0.5 * step;
                    let wk = w * (y - x).powf(exponent);
                    let d = [
                        (xk1 - x) / h,
                        (x - xk) / h,
                        -(xl1 - y) / h,
                        -(y - xl) / h,
                    ];
                    for a in 0..4 {
                        for b in 0..4 {
                            // d[a]*d[b] before the weight: commutativity of
                            // the product keeps the block bitwise symmetric.
                            local[a * 4 + b] += wk * (d[a] * d[b]);
                        }
                    }
                }
            }
        }
    }
    local
}

/// η(u)² = u'(A_loc + A_nl)u, the squared energy norm.
pub fn energy_norm_sq(ops: &OperatorSet, u: &GridFunction) -> Result<f64> {
    u.check_len(&ops.mesh)?;
    let v = u.free(&ops.mesh);
    Ok((&ops.a_total * &v).dot(&v))
}

/// Σ_i w_i |u_i|^α with the Ω-lumped weights; the nodal quadrature used for
/// every nonlinear integral ∫_Ω |u|^α dx.
pub fn lumped_abs_power(ops: &OperatorSet, free: &DVector<f64>, alpha: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..free.len() {
        let w = ops.lumped_omega[i];
        if w > 0.0 {
            acc += w * free[i].abs().powf(alpha);
        }
    }
    acc
}

/// Per-element affine pieces of the interpolant of u restricted to Ω,
/// yielding the exact moments of u against the kernel seen from x > b.
fn omega_kernel_moments(ops: &OperatorSet, u: &GridFunction, x: f64) -> (f64, f64, f64) {
    // Returns (∫_Ω u(y) K(x,y) dy, ∫_Ω K(x,y) dy, u(x)) for K = |x-y|^{-(1+2s)}.
    let mesh = &ops.mesh;
    let h = mesh.h;
    let e = -(1.0 + 2.0 * mesh.spec.s);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..mesh.n_omega_elements {
        let y0 = mesh.nodes[k];
        let y1 = mesh.nodes[k + 1];
        let (u0, u1) = (u.values[k], u.values[k + 1]);
        let c1 = (u1 - u0) / h;
        let u_aff_x = u0 + c1 * (x - y0);
        let lo = x - y1;
        let hi = x - y0;
        let w0 = power_moment(lo, hi, e);
        let w1 = power_moment(lo, hi, e + 1.0);
        // u(y) = u_aff(x) - c1 t with t = x - y.
        num += u_aff_x * w0 - c1 * w1;
        den += w0;
    }
    (num, den, u.eval(mesh, x))
}

/// Nonlocal normal derivative κ ∫_Ω (u(x) - u(y)) |x-y|^{-(1+2s)} dy at a
/// point of the collar interior.
pub fn nonlocal_normal_derivative(ops: &OperatorSet, u: &GridFunction, x: f64) -> Result<f64> {
    u.check_len(&ops.mesh)?;
    let spec = &ops.mesh.spec;
    if !(x > spec.b && x < spec.window_end()) {
        return Err(Error::InvalidParameter(format!(
            "normal derivative point must lie inside the collar, got x = {x}"
        )));
    }
    let (num, den, ux) = omega_kernel_moments(ops, u, x);
    Ok(spec.kernel_constant * (ux * den - num))
}

/// Kernel-weighted average of u over Ω seen from x: the value the natural
/// condition N_s u(x) = 0 would assign at x.
pub fn nonlocal_neumann_reconstruction(ops: &OperatorSet, u: &GridFunction, x: f64) -> Result<f64> {
    u.check_len(&ops.mesh)?;
    let spec = &ops.mesh.spec;
    if !(x > spec.b && x < spec.window_end()) {
        return Err(Error::InvalidParameter(format!(
            "reconstruction point must lie inside the collar, got x = {x}"
        )));
    }
    let (num, den, _) = omega_kernel_moments(ops, u, x);
    Ok(num / den)
}
