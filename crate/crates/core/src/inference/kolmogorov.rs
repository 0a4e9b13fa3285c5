use crate::error::{Error, Result};
use crate::normal;

/// Two-sided Kolmogorov distance between the empirical law of `sorted` and
/// N(0, σ²): max_i max(i/N - Φ(x_i/σ), Φ(x_i/σ) - (i-1)/N).
pub fn kolmogorov_distance(sorted: &[f64], std: f64) -> Result<f64> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Degenerate(format!("target standard deviation {std} is not positive")));
    }
    if sorted.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    if sorted.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter("samples must be sorted and free of NaN".into()));
    }
    let n = sorted.len() as f64;
    let mut worst = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal::cdf(x / std);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        worst = worst.max(above).max(below);
    }
    Ok(worst.clamp(0.0, 1.0))
}

/// Sorts a copy of `samples` and calls [`kolmogorov_distance`].
pub fn kolmogorov_distance_unsorted(samples: &[f64], std: f64) -> Result<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    kolmogorov_distance(&sorted, std)
}
