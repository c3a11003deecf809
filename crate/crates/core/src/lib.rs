#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod actuarial;
pub mod carbon;
pub mod error;
pub mod fund;
pub mod hedging;
pub mod linalg;
pub mod market;
pub mod pricing;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod value_fn;

pub use error::{Error, Result};
