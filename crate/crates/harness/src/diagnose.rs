//! Assumption checklist for a configured problem.

use lsa_core::analysis::stability;
use lsa_core::env::{dobrushin, matrix_power};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::problem::{Problem, HURWITZ};

/// Diagnostic quantities of the observation chain, the mean system and
/// the step schedule.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub n_observations: usize,
    pub dim: usize,
    /// Smallest t with Dobrushin(P^t) ≤ 1/4 on the observation chain.
    pub mixing_time: Option<usize>,
    pub dobrushin_at_mixing_time: Option<f64>,
    pub ergodic: bool,
    pub hurwitz: bool,
    /// λ_min of the stationary feature design (TD instances only).
    pub lambda_min_design: Option<f64>,
    /// Contraction constant a and step bound α_∞ used for the schedule.
    pub a: f64,
    pub alpha_max: f64,
    /// Constants of the Lyapunov certificate solved with P = I.
    pub lyapunov_a: f64,
    pub lyapunov_alpha_max: f64,
    pub kappa_q: f64,
    pub lyapunov_residual: f64,
    pub noise_sup_norm: f64,
    /// 2(1 + λ)(‖θ⋆‖ + 1), valid for unit-norm features and rewards in [0, 1].
    pub td_noise_bound: Option<f64>,
    pub c0: f64,
    pub k0: u64,
    pub gamma: f64,
    pub first_step: f64,
    pub c0_within_alpha_max: bool,
    pub theta_star: Vec<f64>,
    pub direction: Vec<f64>,
    pub sigma2_u: f64,
}

pub fn diagnose(problem: &Problem) -> Result<Diagnostics> {
    let inst = &problem.instance;
    let d = inst.dim();
    let mixing_time = inst.z_mixing_time();
    let report = stability(inst.a_bar(), &DMatrix::identity(d, d))
        .map_err(|e| HarnessError::Assumption { assumption: HURWITZ, source: e })?;
    let td = inst.td();
    let td_constants = td.map(|_| lsa_core::analysis::td_stability_constants(inst)).transpose()?;
    let theta_norm = problem.truth.theta_star.norm();
    Ok(Diagnostics {
        n_observations: inst.n_observations(),
        dim: d,
        mixing_time,
        dobrushin_at_mixing_time: mixing_time.map(|t| dobrushin(&matrix_power(inst.z_kernel(), t))),
        ergodic: true,
        hurwitz: report.hurwitz,
        lambda_min_design: td_constants.map(|c| c.lambda_min_design),
        a: td_constants.map_or(report.a_const, |c| c.a),
        alpha_max: problem.alpha_max,
        lyapunov_a: report.a_const,
        lyapunov_alpha_max: report.alpha_max,
        kappa_q: report.kappa_q,
        lyapunov_residual: report.lyapunov_residual,
        noise_sup_norm: inst.noise_sup_norm(),
        td_noise_bound: td.map(|t| 2.0 * (1.0 + t.discount) * (theta_norm + 1.0)),
        c0: problem.schedule.c0(),
        k0: problem.schedule.k0(),
        gamma: problem.schedule.gamma(),
        first_step: problem.schedule.step_size(1),
        c0_within_alpha_max: problem.schedule.c0() <= problem.alpha_max,
        theta_star: problem.truth.theta_star.iter().copied().collect(),
        direction: problem.direction.as_slice().to_vec(),
        sigma2_u: problem.sigma2(),
    })
}
