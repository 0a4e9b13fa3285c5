use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::LsaInstance;
use crate::error::{Error, Result};
use crate::linalg::UnitVector;
use crate::lsa::LsaTrajectory;

/// Block-length rule for overlapping batch means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObmConfig {
    Explicit(usize),
    /// ⌈n^{4/5}⌉
    Pow45,
    /// ⌈n^{3/4}⌉
    Pow34,
}

/// Smallest b ≥ 1 with b^q ≥ n^p, in exact integer arithmetic when it fits.
fn ceil_root_power(n: usize, p: u32, q: u32) -> usize {
    let guess = (n as f64).powf(p as f64 / q as f64).ceil() as u128;
    let Some(target) = (n as u128).checked_pow(p) else {
        return guess as usize;
    };
    let reaches = |b: u128| b.checked_pow(q).is_none_or(|v| v >= target);
    let mut b = guess.max(1);
    while b > 1 && reaches(b - 1) {
        b -= 1;
    }
    while !reaches(b) {
        b += 1;
    }
    b as usize
}

/// Resolves the block length for a trajectory of length n, clamped to [2, n-1].
pub fn resolve_block(cfg: ObmConfig, n: usize) -> Result<usize> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("block rules need n ≥ 4, got {n}")));
    }
    let raw = match cfg {
        ObmConfig::Explicit(b) => b,
        ObmConfig::Pow45 => ceil_root_power(n, 4, 5),
        ObmConfig::Pow34 => ceil_root_power(n, 3, 4),
    };
    let b = raw.clamp(2, n - 1);
    if b != raw {
        warn!("block length {raw} clamped to {b} for n = {n}");
    }
    Ok(b)
}

/// Variance estimate σ̂²_θ(u) with its block geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObmEstimate {
    pub variance: f64,
    pub block_len: usize,
    pub n: usize,
    #[serde(with = "crate::linalg::serde_vec")]
    pub direction: DVector<f64>,
}

fn check_block(block_len: usize, n: usize) -> Result<()> {
    if block_len < 2 || n < 3 || block_len > n - 1 {
        return Err(Error::BlockTooLong { block_len, n });
    }
    Ok(())
}

/// Residuals r_t = x̄_{b,t} - x̄_n for t = 0..=n-b, where x̄_{b,t} is the mean
/// of x_t..x_{t+b-1}. The series is centered first and the window sum is
/// slid with Neumaier compensation.
pub fn block_residuals_scalar(series: &[f64], block_len: usize) -> Result<Vec<f64>> {
    let n = series.len();
    check_block(block_len, n)?;
    let mean = compensated_sum(series.iter().copied()) / n as f64;
    let mut window = Neumaier::default();
    for &x in &series[..block_len] {
        window.add(x - mean);
    }
    let b = block_len as f64;
    let mut out = Vec::with_capacity(n - block_len + 1);
    out.push(window.value() / b);
    for t in 1..=n - block_len {
        window.add(series[t + block_len - 1] - mean);
        window.add(-(series[t - 1] - mean));
        out.push(window.value() / b);
    }
    Ok(out)
}

/// Block residuals of the projected trajectory, (θ̄_{b,t} - θ̄_n)ᵀu.
pub fn block_residuals(traj: &LsaTrajectory, block_len: usize, u: &UnitVector) -> Result<Vec<f64>> {
    check_direction(traj, u)?;
    block_residuals_scalar(&traj.projected(u), block_len)
}

/// b/(n-b+1) · Σ_t r_t² for a scalar series.
pub fn obm_variance_scalar(series: &[f64], block_len: usize) -> Result<f64> {
    let residuals = block_residuals_scalar(series, block_len)?;
    Ok(obm_from_residuals(&residuals, block_len))
}

pub(crate) fn obm_from_residuals(residuals: &[f64], block_len: usize) -> f64 {
    let scale = block_len as f64 / residuals.len() as f64;
    scale * compensated_sum(residuals.iter().map(|r| r * r))
}

pub fn obm_variance(traj: &LsaTrajectory, block_len: usize, u: &UnitVector) -> Result<ObmEstimate> {
    check_direction(traj, u)?;
    let variance = obm_variance_scalar(&traj.projected(u), block_len)?;
    Ok(ObmEstimate { variance, block_len, n: traj.n(), direction: u.as_vector().clone() })
}

/// OBM estimator applied to the oracle noise sequence uᵀĀ⁻¹ε(Z_ℓ) along a
/// recorded observation path, with the same block geometry as
/// [`obm_variance`].
pub fn obm_noise_variance(inst: &LsaInstance, z_path: &[u32], block_len: usize, u: &UnitVector) -> Result<f64> {
    if u.dim() != inst.dim() {
        return Err(Error::InvalidDimension(format!("direction has dimension {}, expected {}", u.dim(), inst.dim())));
    }
    let a_inv_t = inst
        .a_bar()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularSystem { condition: f64::INFINITY })?
        .transpose();
    // uᵀĀ⁻¹ε(z) = (Ā⁻ᵀu)ᵀε(z), tabulated once per observation.
    let w = a_inv_t * u.as_vector();
    let per_z: Vec<f64> = (0..inst.n_observations()).map(|z| inst.noise_table().row(z).transpose().dot(&w)).collect();
    let series: Vec<f64> = z_path
        .iter()
        .map(|&z| per_z.get(z as usize).copied().ok_or_else(|| Error::InvalidParameter(format!("observation {z} out of range"))))
        .collect::<Result<_>>()?;
    obm_variance_scalar(&series, block_len)
}

fn check_direction(traj: &LsaTrajectory, u: &UnitVector) -> Result<()> {
    if u.dim() != traj.dim() {
        return Err(Error::InvalidDimension(format!("direction has dimension {}, expected {}", u.dim(), traj.dim())));
    }
    Ok(())
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    values.for_each(|x| acc.add(x));
    acc.value()
}
