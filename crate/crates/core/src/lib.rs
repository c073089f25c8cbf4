#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bessel;
pub mod channel;
pub mod compression;
mod error;
pub mod linalg;
pub mod metrics;
pub mod predictor;

pub use error::{Error, Result};
