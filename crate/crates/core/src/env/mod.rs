//! Finite MDPs, policies, induced Markov chains and feature maps.

mod chain;
mod document;
mod features;
mod mdp;

pub use chain::{
    dobrushin, induce_chain, matrix_power, mixing_time, policy_kernel, stationary_distribution, InducedChain,
};
pub use document::EnvDocument;
pub use features::{random_features, FeatureMap};
pub use mdp::{
    exact_value_function, garnet_generate, greedy_policy, lake_generate, random_policy, FiniteMdp, Policy,
    LAKE_ACTIONS,
};

pub(crate) use chain::check_stochastic;
