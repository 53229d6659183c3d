// NaN must fail every range check, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// tensor code reads better with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod constructor;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod hypersurface;
pub mod numkernel;
pub mod report;
pub mod submersion;

pub use error::{Error, Result};
