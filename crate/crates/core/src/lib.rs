//! Spatial branch-and-cut for nonconvex quadratically constrained quadratic
//! programs over bounded complex variables.
//!
//! The solver lifts `x ∈ ℂⁿ` into a Hermitian matrix `Y = [1 x*; x xx*]`,
//! relaxes the rank-one condition to `Y ⪰ 0`, strengthens the relaxation
//! with convex-hull cuts on every tracked 2×2 principal submatrix, and
//! branches on the entry bounds of those submatrices until the relaxation
//! is rank one (or the gap closes).
//!
//! Module map:
//! - [`numerics`]: Hermitian storage and small eigenvalue helpers.
//! - [`model`]: instances, affine shift, entry bounds.
//! - [`relax`]: conic program assembly, chordal decomposition, rank-one
//!   completion and the built-in interior-point backend.
//! - [`cuts`], [`tighten`], [`branch`]: the pieces of the search.
//! - [`driver`]: the depth-first branch-and-cut loop.
//! - [`acopf`], [`boxqp`], [`batch`]: problem frontends and batch runs.

pub mod acopf;
pub mod batch;
pub mod boxqp;
pub mod branch;
pub mod cuts;
pub mod driver;
pub mod error;
pub mod lifted;
pub mod local;
pub mod model;
pub mod numerics;
pub mod relax;
pub mod tighten;

pub use error::{Error, Result};
