//! Persistence, command line and admin API for the bigbird control plane.

pub mod api;
pub mod audit_file;
pub mod cli;
pub mod config;
pub mod snapshot;
