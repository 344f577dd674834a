//! File formats and pipeline commands behind the `fld` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod image_io;
pub mod manifest;
pub mod validation;
pub mod vgrd;

pub use error::{CliError, CliResult, FormatError};
