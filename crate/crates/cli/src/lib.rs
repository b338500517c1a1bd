//! Run configuration, artifact handling and stage orchestration for the
//! `oaprog` command-line tool.

pub mod artifact;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::CliError;
pub use pipeline::{Pipeline, Stage};
