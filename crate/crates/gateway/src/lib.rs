//! HTTP service and command-line front end for manual question answering.

pub mod cli;
pub mod config;
pub mod server;
