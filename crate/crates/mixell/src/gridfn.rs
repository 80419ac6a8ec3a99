//! Nodal functions on the computational window.

use nalgebra::DVector;

use crate::domain::{Mesh, Region};
use crate::error::{Error, Result};

/// A continuous piecewise-linear function given by one value per mesh node.
///
/// The constrained endpoint nodes always carry the value zero; constructors
/// enforce this so a `GridFunction` is a legal member of the discrete space
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: DVector<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: &Mesh) -> Self {
        GridFunction {
            values: DVector::zeros(mesh.n_nodes()),
        }
    }

    /// Samples `f` at the nodes, zeroing the constrained endpoints.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut values = DVector::zeros(mesh.n_nodes());
        for (i, &x) in mesh.nodes.iter().enumerate() {
            if mesh.region[i] != Region::Dirichlet {
                values[i] = f(x);
            }
        }
        GridFunction { values }
    }

    /// Expands a free-dof vector to full nodal values.
    pub fn from_free(mesh: &Mesh, free: &DVector<f64>) -> Self {
        assert_eq!(free.len(), mesh.n_free());
        let mut values = DVector::zeros(mesh.n_nodes());
        for (f, &node) in mesh.node_of_free.iter().enumerate() {
            values[node] = free[f];
        }
        GridFunction { values }
    }

    pub fn check_len(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Restriction to the free degrees of freedom.
    pub fn free(&self, mesh: &Mesh) -> DVector<f64> {
        DVector::from_iterator(
            mesh.n_free(),
            mesh.node_of_free.iter().map(|&n| self.values[n]),
        )
    }

    /// P1 interpolation at an arbitrary point of the closed window.
    pub fn eval(&self, mesh: &Mesh, x: f64) -> f64 {
        let lo = mesh.spec.a;
        let hi = mesh.spec.window_end();
        if x <= lo || x >= hi {
            return 0.0;
        }
        let t = (x - lo) / mesh.h;
        let k = (t.floor() as usize).min(mesh.n_elements - 1);
        let local = t - k as f64;
        self.values[k] * (1.0 - local) + self.values[k + 1] * local
    }

    /// sup over the closed window, max_i |u_i| (attained at a node for P1).
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Minimum nodal value over nodes with coordinate in [lo, hi].
    pub fn min_on(&self, mesh: &Mesh, lo: f64, hi: f64) -> f64 {
        mesh.nodes
            .iter()
            .enumerate()
            .filter(|(_, &x)| x >= lo - 1e-12 && x <= hi + 1e-12)
            .map(|(i, _)| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum nodal value over all Ω̄ nodes excluding the constrained end.
    pub fn min_omega(&self, mesh: &Mesh) -> f64 {
        (1..=mesh.n_omega_elements)
            .map(|i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }
}
