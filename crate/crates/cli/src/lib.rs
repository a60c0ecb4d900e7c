//! Command-line front end for the mavforce simulator: scenario files,
//! CSV logs, offline replay and plotting.

pub mod commands;
pub mod config;
pub mod log;
pub mod plot;
