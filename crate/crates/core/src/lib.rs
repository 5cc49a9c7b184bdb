//! Second-order structure of high-dimensional functional time series.
//!
//! Curves on `[0, 1]` are stored as coefficients in a shared orthonormal
//! basis, so every covariance or spectral kernel reduces to a small
//! coefficient matrix and Hilbert–Schmidt norms become Frobenius norms.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the experiment harness live in the `hdfts` companion crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod curves;
pub mod dependence;
pub mod dfpca;
mod error;
pub mod linalg;
pub mod rng;
pub mod secondorder;
pub mod simulate;
pub mod smoothing;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
