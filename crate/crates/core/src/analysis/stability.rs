use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::instance::LsaInstance;
use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows};

const LYAPUNOV_TOL: f64 = 1e-9;
const DESIGN_FLOOR: f64 = 1e-10;

/// Lyapunov certificate for the mean system matrix Ā.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    #[serde(with = "serde_rows")]
    pub q_matrix: DMatrix<f64>,
    pub a_const: f64,
    pub alpha_max: f64,
    pub kappa_q: f64,
    /// Whether every eigenvalue of -Ā has negative real part.
    pub hurwitz: bool,
    pub lyapunov_residual: f64,
}

/// Closed-form TD constants obtained with Q = I.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdConstants {
    pub a: f64,
    pub alpha_max: f64,
    pub lambda_min_design: f64,
}

/// Solves ĀᵀQ + QĀ = P through the Kronecker system
/// (I ⊗ Āᵀ + Āᵀ ⊗ I) vec(Q) = vec(P) and derives a, α_∞ and κ_Q.
///
/// When -Ā is not Hurwitz the solution (if any) is not a certificate: the
/// report carries `hurwitz = false` and zero constants.
pub fn stability(a_bar: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<StabilityReport> {
    let d = a_bar.nrows();
    if a_bar.ncols() != d || p.shape() != (d, d) || d == 0 {
        return Err(Error::InvalidDimension(format!(
            "stability needs square matrices of equal size, got {:?} and {:?}",
            a_bar.shape(),
            p.shape()
        )));
    }
    if (p - p.transpose()).amax() > 1e-12 * p.amax().max(1.0) || !(linalg::lambda_min(p) > 0.0) {
        return Err(Error::InvalidParameter("P must be symmetric positive definite".into()));
    }
    let hurwitz = a_bar.complex_eigenvalues().iter().all(|ev| ev.re > 0.0);

    let eye = DMatrix::<f64>::identity(d, d);
    let a_t = a_bar.transpose();
    let kron = eye.kronecker(&a_t) + a_t.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(d * d, 1, p.as_slice());
    let solution = kron
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LyapunovSingular("Kronecker system has no unique solution".into()))?;
    let q = linalg::symmetrize(&DMatrix::from_column_slice(d, d, solution.as_slice()));
    let lyapunov_residual = linalg::max_abs(&(&a_t * &q + &q * a_bar - p));
    if !(lyapunov_residual <= LYAPUNOV_TOL * p.amax().max(1.0)) {
        return Err(Error::LyapunovSingular(format!("residual {lyapunov_residual:e} after solve")));
    }

    let q_min = linalg::lambda_min(&q);
    if !hurwitz || q_min <= 0.0 {
        return Ok(StabilityReport {
            q_matrix: q,
            a_const: 0.0,
            alpha_max: 0.0,
            kappa_q: f64::INFINITY,
            hurwitz,
            lyapunov_residual,
        });
    }
    let p_min = linalg::lambda_min(p);
    let q_norm = linalg::lambda_max(&q);
    let kappa_q = q_norm / q_min;
    let a_q = q_weighted_norm(a_bar, &q);
    let a_const = p_min / (2.0 * q_norm);
    let alpha_max = (p_min / (2.0 * kappa_q * a_q * a_q)).min(q_norm / p_min);
    Ok(StabilityReport { q_matrix: q, a_const, alpha_max, kappa_q, hurwitz, lyapunov_residual })
}

/// ‖B‖_Q = ‖Q^{1/2} B Q^{-1/2}‖₂ for symmetric positive definite Q.
pub fn q_weighted_norm(b: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let root = linalg::sym_sqrt(q);
    let inv_root = root.clone().try_inverse().expect("Q is positive definite");
    linalg::spectral_norm(&(&root * b * inv_root))
}

/// TD(0) constants a = (1-λ)·λmin(Σ_φ) and α_∞ = (1-λ)/(1+λ)².
pub fn td_stability_constants(inst: &LsaInstance) -> Result<TdConstants> {
    let td = inst
        .td()
        .ok_or_else(|| Error::InvalidParameter("instance carries no TD structure".into()))?;
    let lambda_min_design = linalg::lambda_min(&td.design_matrix());
    if !(lambda_min_design > DESIGN_FLOOR) {
        return Err(Error::DegenerateDesign { lambda_min: lambda_min_design });
    }
    let lambda = td.discount;
    Ok(TdConstants {
        a: (1.0 - lambda) * lambda_min_design,
        alpha_max: (1.0 - lambda) / ((1.0 + lambda) * (1.0 + lambda)),
        lambda_min_design,
    })
}
