//! Library side of the `sxgb` command-line tool.

pub mod bench;
pub mod csvio;
pub mod driver;
pub mod error;
pub mod keys;
pub mod trace_check;

pub use error::{CliError, Result};
