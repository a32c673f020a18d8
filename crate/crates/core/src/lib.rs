//! Right inverses of the divergence on irregular domains via tree
//! decompositions, with weighted Sobolev bounds.

// `!(x > 0.0)` is used on purpose to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cusp;
pub mod error;
pub mod grid;
pub mod holder;
pub mod local_div;
pub mod numerics;
pub mod pipeline;
pub mod random;
pub mod solver;
pub mod tree;
pub mod whitney;

pub use error::{Error, ErrorClass, Result};
pub use grid::{AaBox, Ball, CellSet, Grid, GridFunction, LocalField, Region};
pub use tree::{DecompositionResult, DomainTree, TreeNode, TreeOnGrid};
