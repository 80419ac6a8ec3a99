//! One-dimensional quadrature helpers: Gauss-Legendre rules and exact
//! moments of power kernels.
//!
//! The nonlocal assembly needs two kinds of integrals. Pairs of elements
//! that do not touch produce smooth integrands, handled by tensorized
//! Gauss-Legendre rules. Touching pairs and the Dirichlet tail reduce to
//! moments `int t^e dt` whose antiderivative degenerates to a logarithm at
//! e = -1; [`power_moment`] evaluates both branches stably.

/// A Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Builds the n-point rule by Newton iteration on the Legendre polynomial.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi-style initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_eval(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Integrates `f` over [lo, hi].
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Exact moment `int_lo^hi t^e dt` for 0 <= lo < hi.
///
/// The antiderivative is t^{e+1}/(e+1) away from e = -1 and log t at
/// e = -1; the expm1 form below switches between the two branches without
/// cancellation when e + 1 is tiny (the s = 1/2 kernel hits e = -1 head on).
pub fn power_moment(lo: f64, hi: f64, e: f64) -> f64 {
    debug_assert!((0.0..hi).contains(&lo), "bad moment interval [{lo}, {hi}]");
    let p = e + 1.0;
    if lo == 0.0 {
        assert!(p > 0.0, "divergent moment: exponent {e} on [0, {hi}]");
        return hi.powf(p) / p;
    }
    let l = (hi / lo).ln();
    let x = p * l;
    if x.abs() < 1e-3 {
        let factor = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
        lo.powf(p) * l * factor
    } else {
        (hi.powf(p) - lo.powf(p)) / p
    }
}
