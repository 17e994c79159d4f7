//! Library behind the `nlac` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod theory;

pub use commands::{emit, eval, rollout, Outcome};
pub use config::RunConfig;
pub use error::{CliError, Result};
