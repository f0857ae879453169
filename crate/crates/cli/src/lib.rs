//! File formats, checkpoints, benchmark and ablation runners for the tabinr
//! imputer, and the `tabinr` command-line front end.

pub mod ablate;
pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, CliResult};
