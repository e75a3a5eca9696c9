//! Limsup sets of ball sequences: disjoint-cover extraction, weak redundancy,
//! Hausdorff content estimates and the experiment pipeline around them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod covering;
pub mod measure;
pub mod extraction;
pub mod dimension;
pub mod experiments;

pub use error::{Error, Flag, Result};
