//! Experiment runner for the terrain-aware search simulator.
//!
//! A TOML config ([`config`]) describes the terrain, the mission defaults and
//! a sweep over policies, team sizes, communication and placement.
//! [`batch::run_batch`] runs every combination for a number of seeds and
//! writes one CSV per run plus `aggregate.csv`; [`summary::summarize`] turns
//! aggregates into a text report.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod config;
pub mod error;
pub mod summary;

pub use batch::{run_batch, AggregateRow, BatchOutput};
pub use config::{parse_config, parse_config_str, ExperimentSpec, Overrides};
pub use error::{CliError, Result};
pub use summary::summarize;
