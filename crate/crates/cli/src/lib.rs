//! Command-line driver for the `ohx` solver: INI configs in, CSV/JSON
//! artifacts and a digest manifest out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod tables;

pub use commands::{execute, Command, Report};
pub use config::{ConfigError, RunConfig};
