#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Configuration, deterministic Monte Carlo drivers and diagnostics for
//! Polyak–Ruppert averaged LSA experiments built on `lsa-core`.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod experiments;
pub mod problem;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use problem::Problem;
