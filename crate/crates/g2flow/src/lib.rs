//! Constrained dynamical systems for torsion-free G₂-structures on
//! T³- and SO(3)-fibered 3-manifolds.
//!
//! A G₂-structure of the form `φ = ω(t) ∧ f dt + ψ(t)` built from a
//! one-parameter family of SU(3)-structures that vanish along the fibers of
//! a principal 3-dimensional group bundle is encoded by a triple `(e, a, S)`
//! of a coframe, a connection and a positive-definite symmetric matrix
//! field.  This crate implements the pointwise exterior algebra relating the
//! triple to the forms `ω, ψ, ψ#, ½ω∧ω, φ, ⋆φ`, the torsion expressions of
//! the structure, and the constrained evolution equations for both the
//! abelian (T³) and the SO(3) fiber, on periodic finite-difference grids and
//! for the homogeneous SU(2) and spherically symmetric radial reductions.
//!
//! Module map:
//!
//! - [`exterior`] — dense bitmask exterior algebra in dimension ≤ 7
//!   (wedge, contraction, Hodge star in an orthonormal basis).
//! - [`linalg3`] — exact-shape 3×3 kernel: determinant, adjugate, Cholesky,
//!   Levi-Civita ε-contractions.
//! - [`grids`] — periodic 3-torus lattice, radial lattice, finite-difference
//!   derivative operators and form-valued field calculus.
//! - [`su3g2`] — pointwise assembly `(e, a, S) → (ω, ψ, ψ#, ½ω∧ω)`, the
//!   inverse decomposition, the G₂ 3-form of a family and the normal-form
//!   reconstruction check.
//! - [`torus_flow`] — T³ system: curvature, constraints, flow right-hand
//!   side, torsion coefficient groups, the second-order wave form.
//! - [`monge_ampere`] — reconstruction of a potential with prescribed
//!   Hessian and the `det Hess ρ = const` verification.
//! - [`so3_flow`] — SO(3) system: covariant calculus, Levi-Civita solve,
//!   flow right-hand side, SU(2) and radial reductions with exact flat
//!   solutions.
//! - [`integrate`] — fixed-step RK4 with constraint monitoring and
//!   convergence studies.
//! - [`snapshot`] — the shared binary field snapshot format (`.g2f`).
//! - [`scenario`], [`check`], [`cli`] — scenario configs, identity check
//!   suites and the command-line front end.
//!
//! The `examples/` directory has one runnable example per capability; the
//! `g2flow` binary exposes `check`, `run`, `convergence` and `info`
//! subcommands over the same library calls.

#![allow(clippy::needless_range_loop)] // index loops mirror the tensor-index formulas
#![allow(clippy::manual_is_multiple_of)]

pub mod check;
pub mod cli;
pub mod exterior;
pub mod grids;
pub mod integrate;
pub mod linalg3;
pub mod monge_ampere;
pub mod scenario;
pub mod snapshot;
pub mod so3_flow;
pub mod su3g2;
pub mod torus_flow;

mod error;
pub use error::{Error, Result};
