// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod network;
pub mod rip;
pub mod solver;

pub use error::{Error, Result};
