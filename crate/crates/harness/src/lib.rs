//! Scenario configuration, Monte Carlo runner and result files for the
//! `phpmht` command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod frames;
pub mod output;
pub mod runner;

pub use config::{FilterKind, ScenarioConfig};
pub use runner::{run_experiment, Experiment, RunResult};
