//! Numerical solution of the two-channel Poisson disorder problem.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod model;
pub mod policies;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
