use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomially decaying step sizes α_k = c0 / (k + k0)^γ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct StepSchedule {
    c0: f64,
    k0: u64,
    gamma: f64,
}

#[derive(Deserialize)]
struct RawSchedule {
    c0: f64,
    k0: u64,
    gamma: f64,
}

impl TryFrom<RawSchedule> for StepSchedule {
    type Error = Error;
    fn try_from(raw: RawSchedule) -> Result<Self> {
        Self::new(raw.c0, raw.k0, raw.gamma)
    }
}

impl StepSchedule {
    pub fn new(c0: f64, k0: u64, gamma: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 = {c0} must be positive")));
        }
        if !(0.5..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} outside [1/2, 1)")));
        }
        Ok(Self { c0, k0, gamma })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn k0(&self) -> u64 {
        self.k0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// α_k for k ≥ 1.
    pub fn step_size(&self, k: u64) -> f64 {
        debug_assert!(k >= 1, "step sizes are indexed from 1");
        self.c0 / ((k + self.k0) as f64).powf(self.gamma)
    }

    /// α_1, …, α_{count}.
    pub fn table(&self, count: usize) -> Vec<f64> {
        (1..=count as u64).map(|k| self.step_size(k)).collect()
    }
}
