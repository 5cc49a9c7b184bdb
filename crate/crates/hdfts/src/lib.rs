//! File formats, experiment configuration and the simulation-study harness
//! built on [`hdfts_core`].

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod study;

pub use error::{CliError, CliResult};
