//! Command implementations behind the `salience` binary.

pub mod commands;
pub mod config;
