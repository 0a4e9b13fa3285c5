use nalgebra::{DMatrix, DVector};

use super::mdp::{check_probability_row, FiniteMdp, Policy};
use crate::error::{Error, Result};

/// Relative singular-value floor below which the stationary system is
/// treated as singular.
const STATIONARY_RCOND: f64 = 1e-9;
/// Stationary mass below this marks a transient (effectively reducible) state.
const MIN_STATIONARY_MASS: f64 = 1e-12;

/// Markov chain induced on states by running a policy in an MDP.
#[derive(Clone, Debug)]
pub struct InducedChain {
    pub kernel: DMatrix<f64>,
    pub stationary: DVector<f64>,
    /// Smallest t with Dobrushin(kernel^t) ≤ 1/4, searched up to 10·n².
    pub mixing_time: Option<usize>,
}

impl InducedChain {
    pub fn from_kernel(kernel: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&kernel)?;
        let stationary = stationary_distribution(&kernel)?;
        let n = kernel.nrows();
        let mixing_time = mixing_time(&kernel, 10 * n * n);
        Ok(Self { kernel, stationary, mixing_time })
    }

    pub fn n_states(&self) -> usize {
        self.kernel.nrows()
    }
}

/// P_π(s' | s) = Σ_a π(a | s) P(s' | s, a).
pub fn policy_kernel(mdp: &FiniteMdp, policy: &Policy) -> DMatrix<f64> {
    let ns = mdp.n_states();
    let mut kernel = DMatrix::zeros(ns, ns);
    for s in 0..ns {
        for a in 0..mdp.n_actions() {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (next, p) in mdp.transition_row(s, a).iter().enumerate() {
                kernel[(s, next)] += w * p;
            }
        }
    }
    kernel
}

pub fn induce_chain(mdp: &FiniteMdp, policy: &Policy) -> Result<InducedChain> {
    policy.check_fits(mdp)?;
    let mut kernel = policy_kernel(mdp, policy);
    // Keep rows stochastic to the last ulp so downstream checks stay tight.
    for mut row in kernel.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        row /= sum;
    }
    InducedChain::from_kernel(kernel)
}

pub(crate) fn check_stochastic(kernel: &DMatrix<f64>) -> Result<()> {
    if kernel.nrows() != kernel.ncols() || kernel.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "kernel must be square and non-empty, got {}x{}",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    for (i, row) in kernel.row_iter().enumerate() {
        let row: Vec<f64> = row.iter().copied().collect();
        check_probability_row(&row).map_err(|msg| Error::InvalidParameter(format!("kernel row {i}: {msg}")))?;
    }
    Ok(())
}

/// Left fixed point μᵀP = μᵀ with Σμ = 1, from a dense solve of (Pᵀ - I)
/// with the last equation replaced by the normalization.
pub fn stationary_distribution(kernel: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = kernel.nrows();
    let mut system = kernel.transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let sv = system.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > STATIONARY_RCOND * smax) {
        return Err(Error::ReducibleChain(format!(
            "stationary system is singular (relative singular value {:e})",
            smin / smax
        )));
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mut mu = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::ReducibleChain("stationary system is singular".into()))?;
    if let Some((s, m)) = mu.iter().enumerate().find(|(_, m)| **m < MIN_STATIONARY_MASS) {
        return Err(Error::ReducibleChain(format!("state {s} has stationary mass {m:e}")));
    }
    let total = mu.sum();
    mu /= total;
    Ok(mu)
}

/// Dobrushin coefficient: the largest total-variation distance between two
/// rows of a stochastic matrix.
pub fn dobrushin(kernel: &DMatrix<f64>) -> f64 {
    let n = kernel.nrows();
    let mut worst = 0.0_f64;
    for z in 0..n {
        for w in z + 1..n {
            let tv: f64 = (0..kernel.ncols()).map(|s| (kernel[(z, s)] - kernel[(w, s)]).abs()).sum::<f64>() * 0.5;
            worst = worst.max(tv);
        }
    }
    worst.min(1.0)
}

/// Smallest t in 1..=cap with Dobrushin(kernel^t) ≤ 1/4.
///
/// Dobrushin(P^t) is non-increasing in t, so the threshold crossing is
/// located by binary lifting over cached squarings.
pub fn mixing_time(kernel: &DMatrix<f64>, cap: usize) -> Option<usize> {
    let n = kernel.nrows();
    if cap == 0 {
        return None;
    }
    if n == 1 {
        return Some(1);
    }
    let mut squares = vec![kernel.clone()];
    while (1usize << squares.len()) <= cap {
        let last = squares.last().expect("non-empty");
        squares.push(last * last);
    }
    // Largest t ≤ cap with Dobrushin(P^t) > 1/4 (t = 0 qualifies: P^0 = I).
    let mut t = 0usize;
    let mut current = DMatrix::identity(n, n);
    for (j, sq) in squares.iter().enumerate().rev() {
        let step = 1usize << j;
        if t + step > cap {
            continue;
        }
        let candidate = &current * sq;
        if dobrushin(&candidate) > 0.25 {
            current = candidate;
            t += step;
        }
    }
    (t < cap).then_some(t + 1)
}

pub fn matrix_power(kernel: &DMatrix<f64>, mut t: usize) -> DMatrix<f64> {
    let n = kernel.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = kernel.clone();
    while t > 0 {
        if t & 1 == 1 {
            result = &result * &base;
        }
        t >>= 1;
        if t > 0 {
            base = &base * &base;
        }
    }
    result
}
