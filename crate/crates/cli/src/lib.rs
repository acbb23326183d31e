//! Command-line front end for `stirap-core`: configuration ingestion,
//! subcommand dispatch and CSV/manifest output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, Layer, RunConfig};
pub use run::{run, CliError, Command, Report};
