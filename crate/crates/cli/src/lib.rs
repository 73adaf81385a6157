//! Command-line front end and HTTP annotation service for `altc-core`.

pub mod al_sim;
pub mod args;
pub mod commands;
pub mod error;
pub mod service;
pub mod session;

pub use commands::run;
pub use error::CliError;
