//! Discrete elasticity complex on triangle meshes.
//!
//! The crate builds the Hu-Zhang stress space together with the
//! C^1 Airy potential space and discontinuous displacements, and provides the
//! tools used to study the complex: inf-sup constants, discrete cohomology,
//! commuting projections, Hodge decompositions and the reference-cell
//! Poincare-type operators that produce polynomial-preserving right inverses
//! of the divergence.

// index loops over coupled arrays read better than zipped iterators here;
// negated float comparisons are meant to reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod refpoincare;

pub use error::{Error, Result};
