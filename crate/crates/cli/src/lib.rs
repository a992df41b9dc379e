//! Command-line front end for `ctqw`: configuration files, output files,
//! density snapshots and the timing harness.

pub mod benchmark;
pub mod config;
pub mod simulate;
pub mod snapshot;
pub mod validate;

pub use config::{load_config, parse_config, LoadedConfig, Overrides};
