//! Monte Carlo experiments, configuration files, report formats and the
//! `lagcov` command-line tool built on the `lagcov` estimators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod suites;

pub use config::{Cell, Config, Pair};
pub use error::{LabError, LabResult};
pub use runner::Runner;
