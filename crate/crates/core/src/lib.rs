//! Numerical laboratory for model surfaces of revolution `dt² + f(t)² dθ²`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod busemann;
pub mod comparison;
pub mod cutlocus;
pub mod distance;
pub mod error;
pub mod geodesic;
pub mod ode;
pub mod roots;
pub mod spec_file;
pub mod warp;

pub use error::{Error, Result};
