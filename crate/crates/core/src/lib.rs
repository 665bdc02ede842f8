//! Exact verification toolkit for solutions of the tetrahedral
//! (Zamolodchikov) equation and the commuting operator families they induce.
//!
//! The crate provides:
//!
//! - exact scalar rings ([`scalars`]): rationals, Z/m, prime fields and a
//!   tolerance-based complex backend;
//! - tensor operators on V^(x)n with placement, composition, partial trace
//!   and exact inversion ([`tensor`]);
//! - set-theoretic and functional tetrahedral equation machinery, including
//!   the electric solution and its residue-ring reductions ([`settheoretic`]);
//! - 3-cocycles and the monomial lift of a set-theoretic solution to a matrix
//!   solution ([`cocycle`]);
//! - the d=1 commuting-family construction from a braid solution and a Lax
//!   operator ([`chain1d`]);
//! - layered products on a 2d lattice of auxiliary lines: twisted solutions,
//!   derived Yang-Baxter and Lax data, the row and column families and the
//!   commutativity theorem between them ([`layer2d`]);
//! - the 3d vertex model: brute-force partition function against the
//!   layer-to-layer transfer matrix ([`lattice3d`]).
//!
//! Everything is checked by finite tensor contraction over exact rings, so
//! each verification is a literal identity of matrices, not an approximation.

pub mod chain1d;
pub mod cocycle;
pub mod error;
pub mod fleet;
pub mod lattice3d;
pub mod layer2d;
pub mod report;
pub mod scalars;
pub mod settheoretic;
pub mod tensor;

pub use error::{Error, Result};
pub use report::VerificationReport;
pub use scalars::{RingDescriptor, RingElement};
pub use tensor::{PlacedOperator, SpaceShape, TensorOperator};
