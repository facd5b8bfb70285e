//! Command-line pipeline: banks, scenes, questions, features, training and
//! reports, with a provenance manifest beside every artifact.

pub mod cli;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod manifest;

pub use cli::Cli;
pub use commands::run;
pub use error::{CliError, Result};
