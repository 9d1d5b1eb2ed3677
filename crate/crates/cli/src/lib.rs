//! Experiment plumbing for `cf-power`: configuration files, budget sweeps
//! with CSV output, threshold tables and preset reproduction.

pub mod config;
pub mod reproduce;
pub mod sweep;
