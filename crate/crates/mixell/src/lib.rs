//! A numerical laboratory for the mixed local-nonlocal operator
//! ℒ = -Δ + (-Δ)^s on an interval, under a mixed exterior condition:
//! Dirichlet data on most of the complement, a nonlocal Neumann collar
//! 𝒩 = (b, b+w) glued to the right endpoint of Ω = (a, b).
//!
//! The pieces fit together in the order of the modules:
//!
//! - [`domain`] lays the uniform grid over the window [a, b+w], tags
//!   regions, and integrates the Dirichlet tail of the kernel exactly.
//! - [`operators`] assembles the local stiffness, the Gagliardo form over
//!   Q = ℝ²∖(Ω^c×Ω^c) (touching element pairs by antiderivatives, far
//!   pairs by tensor Gauss), the mass matrices, and the energy η(·)².
//! - [`elliptic`] solves ℒu = f and finds the principal eigenpair; both
//!   are the substrate for everything nonlinear.
//! - [`singular`] runs the monotone regularization schedule for
//!   ℒu = u^{-q}, with the damped fixed point per level, the Newton
//!   polish below q = 1, and the transformed energy bounds above.
//! - [`sobolev`] extracts the sharp constant of
//!   η(v)² ≥ R (∫_Ω |v|^{1-q})^{2/(1-q)} from the singular limit and
//!   cross-checks it against a direct constrained minimization.
//! - [`nehari`] splits the manifold of the perturbed problem
//!   ℒu = λu^{-q} + u^p into its two branches and finds one solution on
//!   each, with barrier and fiber certificates.
//! - [`verify`] names every invariant the other modules promise and runs
//!   them as one suite, shared by the test tree and the command line.
//!
//! The brute-force quadrature and dense-algebra reference routines live in
//! [`oracle`]; they are deliberately written against the definitions, not
//! the assembly, so agreement means something.

pub mod domain;
pub mod elliptic;
pub mod error;
pub mod gridfn;
pub mod nehari;
pub mod operators;
pub mod oracle;
pub mod quad;
pub mod singular;
pub mod sobolev;
pub mod verify;

pub use domain::{build_mesh, DomainSpec, Mesh, Region};
pub use error::{Error, Result};
pub use gridfn::GridFunction;
pub use operators::{assemble, energy_norm_sq, OperatorSet};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
