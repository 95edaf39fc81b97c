//! Command-line front end for the `maskfusion` library: WAV I/O, corpus files,
//! configuration, and the `synth`, `oracle`, `train`, `enhance` and `sweep`
//! commands.

pub mod commands;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod fsio;
pub mod wav;

pub use error::{CliError, CliResult};
