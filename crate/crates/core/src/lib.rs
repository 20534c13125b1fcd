// NaN must fail the `!(x > 0.0)` style argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod par;
pub mod quadrature;
pub mod reference;
pub mod spatial;
pub mod stepper;

pub use error::{Error, Result};
