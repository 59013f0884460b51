//! Command-line front end: synthesis, extraction, training, evaluation,
//! streaming and runtime profiling over the rfprint pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::CliError;
