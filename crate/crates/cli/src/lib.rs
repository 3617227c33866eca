//! Command-line front end: scenario files, gain files and CSV reports.

pub mod commands;
pub mod error;
pub mod gains;
pub mod matrix;
pub mod output;
pub mod scenario;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
