//! The `evoflow` command-line harness: versioned configs, parallel runs,
//! verification reports and artifact writers on top of `evoflow-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod harness;
pub mod io;
pub mod runner;
