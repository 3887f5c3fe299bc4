//! File formats and commands behind the `hawkes-vb` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, ErrorKind, Result};
