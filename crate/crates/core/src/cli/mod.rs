//! Configuration parsing and scenario drivers behind the `pdcsim` binary.

pub mod config;
pub mod run;
pub mod validate;

pub use config::{parse_config, ConfigError, RunConfig, Scenario};
pub use run::{run, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
