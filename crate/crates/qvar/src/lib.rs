//! File formats, run manifests and the `qvar` command line on top of
//! [`qvar_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod run;

pub use error::{CliError, Result};
