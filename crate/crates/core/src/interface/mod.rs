//! Configuration, output emission, and the command-line surface.

pub mod cli;
pub mod config;
pub mod emit;

pub use cli::{run, Cli};
pub use config::{parse_config, RunConfig};
