//! Operator configuration, verification suites and report emission.

pub mod config;
pub mod expr;
pub mod report;
pub mod suites;
