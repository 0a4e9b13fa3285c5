use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::instance::{LsaInstance, MAX_CONDITION};
use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows, serde_vec, UnitVector};
use crate::lsa::StepSchedule;

const POISSON_TOL: f64 = 1e-9;

/// Exact limits of the averaged LSA iterates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(with = "serde_vec")]
    pub theta_star: DVector<f64>,
    /// Long-run covariance of the stationary noise ε(Z).
    #[serde(with = "serde_rows")]
    pub sigma_eps: DMatrix<f64>,
    /// CLT covariance Ā⁻¹ Σ_ε Ā⁻ᵀ.
    #[serde(with = "serde_rows")]
    pub sigma_inf: DMatrix<f64>,
    /// Σ_φ, present for TD instances only.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rows")]
    pub design: Option<DMatrix<f64>>,
    pub poisson_residual: f64,
}

mod opt_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(crate::linalg::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        rows.map(|r| crate::linalg::from_rows(&r).ok_or_else(|| serde::de::Error::custom("ragged matrix rows")))
            .transpose()
    }
}

/// Solves the Poisson equation ε̂ - Pε̂ = ε coordinate-wise through the
/// fundamental matrix (I - P + 1πᵀ)⁻¹. Returns ε̂ (one row per observation)
/// and the sup-norm residual.
pub fn poisson_solution(inst: &LsaInstance) -> Result<(DMatrix<f64>, f64)> {
    let n = inst.n_observations();
    let p = inst.z_kernel();
    let pi = inst.z_stationary();
    let fundamental = DMatrix::identity(n, n) - p + DMatrix::from_fn(n, n, |_, j| pi[j]);
    let eps = inst.noise_table();
    let hat = fundamental
        .lu()
        .solve(eps)
        .ok_or(Error::PoissonResidual { residual: f64::INFINITY })?;
    let residual = linalg::max_abs(&(&hat - p * &hat - eps));
    if !(residual <= POISSON_TOL) {
        return Err(Error::PoissonResidual { residual });
    }
    Ok((hat, residual))
}

/// θ⋆, Σ_ε, Σ_∞ and (for TD) Σ_φ, computed exactly on the finite chain.
///
/// Σ_ε = E_π[ε ε̂ᵀ] + E_π[ε̂ εᵀ] - E_π[ε εᵀ], which equals the two-sided sum
/// of lag covariances; the result is symmetrized.
pub fn ground_truth(inst: &LsaInstance) -> Result<GroundTruth> {
    let condition = linalg::condition_number(inst.a_bar());
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let a_inv = inst.a_bar().clone().try_inverse().ok_or(Error::SingularSystem { condition })?;
    let (hat, poisson_residual) = poisson_solution(inst)?;
    let eps = inst.noise_table();
    let weighted = DMatrix::from_fn(eps.nrows(), eps.ncols(), |z, j| inst.z_stationary()[z] * eps[(z, j)]);
    let cross = weighted.transpose() * &hat;
    let contemporaneous = weighted.transpose() * eps;
    let sigma_eps = linalg::symmetrize(&(&cross + cross.transpose() - contemporaneous));
    let sigma_inf = linalg::symmetrize(&(&a_inv * &sigma_eps * a_inv.transpose()));
    let design = inst.td().map(|td| td.design_matrix());
    Ok(GroundTruth { theta_star: inst.theta_star().clone(), sigma_eps, sigma_inf, design, poisson_residual })
}

/// σ²(u) = uᵀ Σ_∞ u.
pub fn sigma_u(gt: &GroundTruth, u: &UnitVector) -> f64 {
    quadratic_form(&gt.sigma_inf, u.as_vector()).max(0.0)
}

fn quadratic_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// Finite-n variance σ_n²(u) = uᵀ Σ_n u with
/// Σ_n = (1/n) Σ_{ℓ=2}^{n-1} Q_ℓ Σ_ε Q_ℓᵀ and Q_ℓ = α_ℓ Σ_{k=ℓ}^{n-1} G_{ℓ+1:k}.
///
/// The factors of G commute (all are polynomials in Ā), so Q_ℓᵀu follows the
/// backward recursion S_{n-1} = I, S_ℓ = I + (I - α_{ℓ+1}Ā) S_{ℓ+1} applied
/// to u, in O(n d²).
pub fn finite_n_variance(
    inst: &LsaInstance,
    gt: &GroundTruth,
    schedule: &StepSchedule,
    n: usize,
    u: &UnitVector,
) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("finite-n variance needs n ≥ 3, got {n}")));
    }
    let a_t = inst.a_bar().transpose();
    // s holds S_ℓᵀ u, starting from ℓ = n - 1.
    let mut s = u.as_vector().clone();
    let mut total = 0.0;
    let mut ell = n - 1;
    loop {
        let alpha = schedule.step_size(ell as u64);
        let q = &s * alpha;
        total += quadratic_form(&gt.sigma_eps, &q);
        if ell == 2 {
            break;
        }
        let next_alpha = schedule.step_size(ell as u64);
        s = u.as_vector() + (&s - &a_t * &s * next_alpha);
        ell -= 1;
    }
    Ok((total / n as f64).max(0.0))
}
