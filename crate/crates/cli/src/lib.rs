//! Command-line front end for the `robustq` toolkit: configuration files,
//! artifact formats and the subcommand implementations.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

pub use error::{CliError, CliResult};
