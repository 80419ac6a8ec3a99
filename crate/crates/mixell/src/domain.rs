//! Interval geometry and meshing.
//!
//! The configuration is one-dimensional. The equation lives on Ω = (a, b);
//! a Neumann collar N = (b, b + w) is attached on the right, and the rest
//! of the line, D = (-∞, a] ∪ [b + w, ∞), carries homogeneous Dirichlet
//! values. Functions are represented on the closed window [a, b + w] by
//! continuous piecewise linears on a uniform grid; the endpoint nodes at a
//! and b + w are constrained to zero, every other node is a degree of
//! freedom (including the interface node at b and the collar interior).

use crate::error::{Error, Result};

/// Geometric and kernel data defining one problem instance.
///
/// `s` is the fractional order of the kernel |x - y|^{-(1+2s)} and
/// `kernel_constant` the positive weight κ multiplying the nonlocal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub a: f64,
    pub b: f64,
    pub collar_width: f64,
    pub s: f64,
    pub kernel_constant: f64,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::InvalidDomain(format!(
                "need a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.collar_width.is_finite() && self.collar_width > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "collar width must be positive, got {}",
                self.collar_width
            )));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidDomain(format!(
                "fractional order s must lie in (0, 1) exclusive, got {}",
                self.s
            )));
        }
        if !(self.kernel_constant.is_finite() && self.kernel_constant >= 0.0) {
            return Err(Error::InvalidDomain(format!(
                "kernel constant must be nonnegative, got {}",
                self.kernel_constant
            )));
        }
        Ok(())
    }

    /// Right end of the computational window, b + w.
    pub fn window_end(&self) -> f64 {
        self.b + self.collar_width
    }

    /// |Ω| = b - a.
    pub fn omega_length(&self) -> f64 {
        self.b - self.a
    }
}

/// Where a node sits relative to the Ω / collar / exterior partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Constrained endpoint (x = a or x = b + w), value pinned to zero.
    Dirichlet,
    /// Interior of Ω.
    Omega,
    /// The single node at x = b separating Ω from the collar.
    Interface,
    /// Interior of the Neumann collar.
    Collar,
}

/// Uniform P1 mesh of the window [a, b + w].
#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: DomainSpec,
    pub h: f64,
    /// Node coordinates a + i h, i = 0..=n_elements.
    pub nodes: Vec<f64>,
    pub region: Vec<Region>,
    /// Free-dof index for each node; `None` at the constrained endpoints.
    pub free_of_node: Vec<Option<usize>>,
    pub node_of_free: Vec<usize>,
    /// Number of elements inside Ω; the interface node has index n_omega_elements.
    pub n_omega_elements: usize,
    pub n_elements: usize,
}

/// Checks that `step` tiles `length` and returns the element count.
fn element_count(length: f64, step: f64, what: &'static str) -> Result<usize> {
    let ratio = length / step;
    let count = ratio.round();
    if count < 1.0 || (ratio - count).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::MisalignedMesh { h: step, what });
    }
    Ok(count as usize)
}

/// Builds the uniform mesh; errors if h does not divide both b - a and w.
pub fn build_mesh(spec: DomainSpec, h: f64) -> Result<Mesh> {
    spec.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh width must be positive, got {h}")));
    }
    let n_omega = element_count(spec.b - spec.a, h, "b - a")?;
    let n_collar = element_count(spec.collar_width, h, "the collar width")?;
    let n_elements = n_omega + n_collar;

    let mut nodes = Vec::with_capacity(n_elements + 1);
    let mut region = Vec::with_capacity(n_elements + 1);
    for i in 0..=n_elements {
        nodes.push(spec.a + i as f64 * h);
        region.push(if i == 0 || i == n_elements {
            Region::Dirichlet
        } else if i < n_omega {
            Region::Omega
        } else if i == n_omega {
            Region::Interface
        } else {
            Region::Collar
        });
    }

    let mut free_of_node = vec![None; n_elements + 1];
    let mut node_of_free = Vec::with_capacity(n_elements.saturating_sub(1));
    for (i, slot) in free_of_node.iter_mut().enumerate() {
        if region[i] != Region::Dirichlet {
            *slot = Some(node_of_free.len());
            node_of_free.push(i);
        }
    }

    Ok(Mesh {
        spec,
        h,
        nodes,
        region,
        free_of_node,
        node_of_free,
        n_omega_elements: n_omega,
        n_elements,
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.node_of_free.len()
    }

    /// True when element k (spanning [nodes[k], nodes[k+1]]) lies inside Ω.
    pub fn element_in_omega(&self, k: usize) -> bool {
        k < self.n_omega_elements
    }

    /// Nodes of Ω̄, i.e. everything up to and including the interface.
    pub fn omega_node_range(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.n_omega_elements
    }

    /// The subinterval ω = middle half of Ω used for interior positivity checks.
    pub fn interior_window(&self) -> (f64, f64) {
        let quarter = 0.25 * self.spec.omega_length();
        (self.spec.a + quarter, self.spec.b - quarter)
    }

    /// Evaluates the global hat function of `node` at x.
    pub fn hat(&self, node: usize, x: f64) -> f64 {
        let xi = self.nodes[node];
        let d = (x - xi).abs();
        if d >= self.h {
            0.0
        } else {
            // Clip to the window so the boundary hats stay half-supported.
            if x < self.spec.a || x > self.spec.window_end() {
                0.0
            } else {
                1.0 - d / self.h
            }
        }
    }
}

/// Weight of the Dirichlet exterior seen from x ∈ (a, b + w):
/// κ ∫_D |x - y|^{-(1+2s)} dy = κ [ (x-a)^{-2s} + (b+w-x)^{-2s} ] / (2s).
pub fn dirichlet_tail_weight(spec: &DomainSpec, x: f64) -> f64 {
    assert!(
        x > spec.a && x < spec.window_end(),
        "tail weight is defined on the open window only, got x = {x}"
    );
    let two_s = 2.0 * spec.s;
    spec.kernel_constant * ((x - spec.a).powf(-two_s) + (spec.window_end() - x).powf(-two_s))
        / two_s
}
