//! Scenario configuration, presets, runner and output writers behind the
//! `solq` command-line interface.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
