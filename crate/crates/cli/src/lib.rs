//! Library surface of the `rado` command-line front end: configuration
//! loading and the subcommand implementations, reused by the binary and by
//! the integration test suites.

pub mod commands;
pub mod config;
