//! Command-line front end for `disjoint-core`: sieve caches, reports and experiment presets.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;

pub use error::LabError;
