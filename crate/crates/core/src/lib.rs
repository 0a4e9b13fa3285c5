#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Linear stochastic approximation under Markovian noise: finite MDP
//! environments, exact ground truth, the Polyak–Ruppert averaged recursion
//! and batch-means bootstrap inference.

pub mod analysis;
pub mod env;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod lsa;
pub mod normal;
pub mod seed;

pub use error::{Error, Result};
pub use linalg::UnitVector;
