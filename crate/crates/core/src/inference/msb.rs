use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::obm::{block_residuals, ObmEstimate};
use crate::error::{Error, Result};
use crate::linalg::UnitVector;
use crate::lsa::LsaTrajectory;
use crate::normal;
use crate::seed::derive_seed;

/// m multiplier-bootstrap statistics √b/√(n-b+1) · Σ_t w_t r_t with fresh
/// i.i.d. N(0,1) weights per draw. Draw j uses its own stream seeded by
/// `derive_seed(seed, [j])`, so the output does not depend on the worker
/// count.
pub fn msb_draws(traj: &LsaTrajectory, block_len: usize, u: &UnitVector, m: usize, seed: u64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidParameter("at least one bootstrap draw is required".into()));
    }
    let residuals = block_residuals(traj, block_len, u)?;
    let scale = (block_len as f64 / residuals.len() as f64).sqrt();
    Ok((0..m as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[j]));
            let mut acc = 0.0;
            for r in &residuals {
                let w: f64 = StandardNormal.sample(&mut rng);
                acc += w * r;
            }
            scale * acc
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QuantileMethod {
    Analytic,
    MonteCarlo { draws: usize },
}

/// Quantiles of the √n-scaled bootstrap statistic at a two-sided level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsbQuantile {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: QuantileMethod,
}

/// How the bootstrap quantile is obtained.
#[derive(Clone, Copy, Debug)]
pub enum CiMethod<'a> {
    /// Exact conditional-Gaussian quantile z_{(1+level)/2} σ̂(u).
    Analytic,
    /// Empirical quantile of |draws| from [`msb_draws`].
    MonteCarlo(&'a [f64]),
}

/// Interval for uᵀθ⋆ centred at uᵀθ̄_n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    pub quantile: MsbQuantile,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Symmetric interval of half-width q/√n where q is the bootstrap quantile.
///
/// For the Monte Carlo path q is the `level`-quantile of |draws|: the
/// statistic is centred and symmetric, so P(|T| ≤ q) = level matches the
/// analytic z_{(1+level)/2} σ̂.
pub fn confidence_interval(
    center: f64,
    est: &ObmEstimate,
    level: f64,
    method: CiMethod<'_>,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    if est.n < 4 {
        return Err(Error::InvalidParameter(format!("interval needs n ≥ 4, got {}", est.n)));
    }
    let (q, method) = match method {
        CiMethod::Analytic => {
            (normal::quantile(0.5 * (1.0 + level)) * est.variance.max(0.0).sqrt(), QuantileMethod::Analytic)
        }
        CiMethod::MonteCarlo(draws) => {
            if draws.is_empty() {
                return Err(Error::InvalidParameter("no bootstrap draws supplied".into()));
            }
            let mut abs: Vec<f64> = draws.iter().map(|d| d.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let idx = ((level * abs.len() as f64).ceil() as usize).clamp(1, abs.len()) - 1;
            (abs[idx], QuantileMethod::MonteCarlo { draws: draws.len() })
        }
    };
    let half_width = q / (est.n as f64).sqrt();
    Ok(ConfidenceInterval {
        center,
        half_width,
        lower: center - half_width,
        upper: center + half_width,
        quantile: MsbQuantile { level, lower: -q, upper: q, method },
    })
}

/// Interval for uᵀθ⋆ from a trajectory: centred at uᵀθ̄_n.
pub fn trajectory_interval(
    traj: &LsaTrajectory,
    est: &ObmEstimate,
    u: &UnitVector,
    level: f64,
    method: CiMethod<'_>,
) -> Result<ConfidenceInterval> {
    confidence_interval(u.as_vector().dot(traj.pr_average()), est, level, method)
}
