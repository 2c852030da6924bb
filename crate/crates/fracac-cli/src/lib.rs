//! Command-line driver for the fracac experiments: run configurations,
//! commands that emit CSV/JSON artifacts, and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod output;
pub mod suites;

pub use commands::{defaults, run};
pub use config::RunConfig;
pub use output::{Check, CommandOutput};
