use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Empirical coverage rate with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub rate: f64,
    pub stderr: f64,
    pub count: usize,
}

pub fn coverage(results: &[(Interval, f64)]) -> Result<Coverage> {
    coverage_from_hits(results.iter().map(|(iv, truth)| iv.contains(*truth)))
}

pub fn coverage_from_hits(hits: impl IntoIterator<Item = bool>) -> Result<Coverage> {
    let (covered, count) = hits.into_iter().fold((0usize, 0usize), |(c, n), hit| (c + hit as usize, n + 1));
    if count == 0 {
        return Err(Error::InvalidParameter("coverage needs at least one result".into()));
    }
    let rate = covered as f64 / count as f64;
    Ok(Coverage { rate, stderr: (rate * (1.0 - rate) / count as f64).sqrt(), count })
}

/// Linear-interpolation quantile of sorted data (the usual "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles (q25, q50, q75) of a sample.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.5), quantile_sorted(&sorted, 0.75))
}
