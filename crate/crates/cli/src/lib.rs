//! Configuration loading and artifact writing for the `worldline` binary.

pub mod config;
pub mod report;

pub use config::{load_config, ConfigError, RunConfig};
