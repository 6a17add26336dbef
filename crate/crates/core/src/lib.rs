//! Maximum likelihood fitting of acyclic directed mixed graph (ADMG) models
//! to multivariate binary data, using the generalized Möbius
//! parametrization.

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod error;
pub mod fitting;
pub mod graph;
pub mod heads;
pub mod inference;
pub mod moebius;
pub mod select;

pub use error::{Error, Result};
pub use graph::{Admg, EdgeKind, VertexSet};
