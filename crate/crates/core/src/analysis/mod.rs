//! Exact ground truth and stability constants for finite-chain LSA problems.

mod instance;
mod stability;
mod truth;

pub use instance::{build_td_instance, LsaInstance, TdStructure, Transition, MAX_CONDITION};
pub use stability::{q_weighted_norm, stability, td_stability_constants, StabilityReport, TdConstants};
pub use truth::{finite_n_variance, ground_truth, poisson_solution, sigma_u, GroundTruth};
