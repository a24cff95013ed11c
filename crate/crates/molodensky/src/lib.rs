//! Configuration, file formats and experiments around `molodensky-core`.

pub mod config;
pub mod experiments;
pub mod io;

pub use config::{parse_config, ConfigError, RunConfig, Shape};
