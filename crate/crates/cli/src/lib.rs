//! Command implementations behind the `dmdt` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
