//! Experiment configuration and execution behind the `spinnet` binary.

pub mod config;
pub mod runner;
