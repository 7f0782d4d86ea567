//! Scenario tooling: synthetic missions, config files, batch runs and reports.

pub mod config;
pub mod matrix;
pub mod mission;
pub mod report;
pub mod scenario;
