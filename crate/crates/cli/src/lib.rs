//! Batch experiment driver for harmonic maps on cones.
//!
//! A TOML [`config::ExperimentConfig`] selects one of six pipelines:
//! `solve`, `npc-check`, `energy-convergence`, `regularity`, `sharpness` and
//! `hopf-lax`. Each writes CSV tables and a `summary.json` listing every
//! check with its statistic, tolerance and verdict.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod setup;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use experiments::run_experiment;
pub use report::{Check, Summary};
