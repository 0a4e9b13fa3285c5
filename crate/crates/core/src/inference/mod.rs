//! Batch-means variance estimation, the multiplier subsample bootstrap and
//! the statistics used to score them.

mod coverage;
mod kolmogorov;
mod msb;
mod obm;

pub use coverage::{coverage, coverage_from_hits, quantile_sorted, quartiles, Coverage, Interval};
pub use kolmogorov::{kolmogorov_distance, kolmogorov_distance_unsorted};
pub use msb::{
    confidence_interval, msb_draws, trajectory_interval, CiMethod, ConfidenceInterval, MsbQuantile, QuantileMethod,
};
pub use obm::{
    block_residuals, block_residuals_scalar, obm_noise_variance, obm_variance, obm_variance_scalar, resolve_block,
    ObmConfig, ObmEstimate,
};
