//! Order-by-order construction of quasi-periodic solutions of a quintic Schrödinger-type
//! equation on the circle: frequencies, series coefficients, trees and their cancellations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod asymptotics;
pub mod cancellation;
pub mod exec;
pub mod frequency;
pub mod lindstedt;
pub mod momentum;
pub mod oracles;
pub mod scalar;
pub mod trees;
pub mod treesupport;

pub use error::{Error, Result};
pub use exec::Exec;
