//! Experiment runner for the `planeq` library: configuration, output writers,
//! subcommands and the acceptance suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;
