//! File formats, checkpoints, report bundles and the command-line front end
//! for `rarebreak-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod svg;

pub use error::{exit, CliError, Result};
