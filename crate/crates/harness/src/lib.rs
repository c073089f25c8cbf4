//! Experiment driver for `ddfas-core`: configuration, artifact files, the
//! pipeline stages and the CSV report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
