//! Turns a validated configuration into a ready-to-simulate problem: the
//! environment, the TD instance, its exact ground truth, the step schedule
//! and the projection direction.

use lsa_core::analysis::{
    build_td_instance, ground_truth, stability, td_stability_constants, GroundTruth, LsaInstance,
};
use lsa_core::env::{
    garnet_generate, greedy_policy, lake_generate, random_policy, random_features, EnvDocument, FeatureMap,
    FiniteMdp, Policy,
};
use lsa_core::lsa::{ChainStart, LsaRunner, StepSchedule};
use lsa_core::UnitVector;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Direction, EnvSpec, ExperimentConfig, PolicyKind, ThetaStart};
use crate::error::{HarnessError, Result};

pub const ERGODICITY: &str = "uniformly ergodic observation chain";
pub const HURWITZ: &str = "Hurwitz mean matrix";
pub const DESIGN: &str = "non-degenerate feature design";

/// Tolerance for policy iteration when the greedy policy is requested.
const GREEDY_TOL: f64 = 1e-12;

/// The MDP, behaviour policy and feature map described by a configuration.
#[derive(Clone, Debug)]
pub struct Environment {
    pub mdp: FiniteMdp,
    pub policy: Policy,
    pub features: FeatureMap,
}

impl Environment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let (mdp, doc) = match &cfg.env {
            EnvSpec::Garnet { n_states, n_actions, branching } => {
                let mdp = garnet_generate(*n_states, *n_actions, *branching, cfg.discount, cfg.env_seed)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                (mdp, None)
            }
            EnvSpec::Lake { width, height, hole_fraction } => {
                (lake_generate(*width, *height, *hole_fraction, cfg.discount, cfg.env_seed)?, None)
            }
            EnvSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    HarnessError::Config(format!("cannot read environment {}: {e}", path.display()))
                })?;
                let doc = EnvDocument::from_json(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
                (doc.mdp().map_err(|e| HarnessError::Config(e.to_string()))?, Some(doc))
            }
        };
        let stored_policy = doc.as_ref().map(EnvDocument::policy).transpose()?.flatten();
        let stored_features = doc.as_ref().map(EnvDocument::features).transpose()?.flatten();

        let policy = match stored_policy {
            Some(p) => p,
            None => match cfg.policy {
                PolicyKind::Random => random_policy(&mdp, cfg.env_seed.wrapping_add(1)),
                PolicyKind::Greedy => greedy_policy(&mdp, GREEDY_TOL)?.soften(cfg.policy_epsilon)?,
            },
        };
        let features = match stored_features {
            Some(f) => f,
            None => random_features(mdp.n_states(), cfg.feature_dim, cfg.feature_seed)
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        };
        Ok(Self { mdp, policy, features })
    }

    pub fn document(&self) -> EnvDocument {
        EnvDocument::from_parts(&self.mdp, Some(&self.policy), Some(&self.features))
    }
}

/// Everything a Monte Carlo driver needs, with the ground truth solved once.
#[derive(Clone, Debug)]
pub struct Problem {
    pub instance: LsaInstance,
    pub truth: GroundTruth,
    pub schedule: StepSchedule,
    pub direction: UnitVector,
    pub theta0: DVector<f64>,
    pub start: ChainStart,
    /// Largest step size inside the contraction regime.
    pub alpha_max: f64,
}

impl Problem {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let env = Environment::from_config(cfg)?;
        let instance = build_td_instance(&env.mdp, &env.policy, &env.features).map_err(|e| match e {
            lsa_core::Error::ReducibleChain(_) => HarnessError::Assumption { assumption: ERGODICITY, source: e },
            other => HarnessError::Core(other),
        })?;
        Self::from_instance(instance, cfg)
    }

    /// Builds the problem for an explicit instance; the environment section
    /// of `cfg` is ignored.
    pub fn from_instance(instance: LsaInstance, cfg: &ExperimentConfig) -> Result<Self> {
        let truth = ground_truth(&instance).map_err(|e| match e {
            lsa_core::Error::SingularSystem { .. } => HarnessError::Assumption { assumption: HURWITZ, source: e },
            other => HarnessError::Core(other),
        })?;
        let alpha_max = contraction_step(&instance)?;
        let c0 = cfg.c0.unwrap_or(0.9 * alpha_max);
        let k0 = cfg.k0.unwrap_or_else(|| default_k0(c0, alpha_max, cfg.gamma));
        let schedule = StepSchedule::new(c0, k0, cfg.gamma).map_err(|e| HarnessError::Config(e.to_string()))?;
        let direction = resolve_direction(&cfg.direction, &instance)?;
        let theta0 = match cfg.theta0 {
            ThetaStart::Zero => DVector::zeros(instance.dim()),
            ThetaStart::ThetaStar => truth.theta_star.clone(),
        };
        let start = cfg.burn_in.map_or(ChainStart::Stationary, ChainStart::BurnIn);
        Ok(Self { instance, truth, schedule, direction, theta0, start, alpha_max })
    }

    /// A runner with step sizes tabulated up to `n_max`.
    pub fn runner(&self, n_max: usize) -> LsaRunner {
        LsaRunner::new(&self.instance, self.schedule).with_step_table(n_max)
    }

    /// uᵀΣ∞u.
    pub fn sigma2(&self) -> f64 {
        lsa_core::analysis::sigma_u(&self.truth, &self.direction)
    }
}

/// TD closed form when the instance carries TD structure, otherwise the
/// Lyapunov bound with P = I.
fn contraction_step(instance: &LsaInstance) -> Result<f64> {
    if instance.td().is_some() {
        return td_stability_constants(instance)
            .map(|c| c.alpha_max)
            .map_err(|e| HarnessError::Assumption { assumption: DESIGN, source: e });
    }
    let d = instance.dim();
    let report = stability(instance.a_bar(), &DMatrix::identity(d, d))
        .map_err(|e| HarnessError::Assumption { assumption: HURWITZ, source: e })?;
    if !report.hurwitz {
        return Err(HarnessError::Assumption {
            assumption: HURWITZ,
            source: lsa_core::Error::InvalidParameter("an eigenvalue of the mean matrix has non-positive real part".into()),
        });
    }
    Ok(report.alpha_max)
}

/// Smallest k0 ≥ 0 with c0 / (1 + k0)^γ ≤ α_max.
pub fn default_k0(c0: f64, alpha_max: f64, gamma: f64) -> u64 {
    if !(alpha_max > 0.0) || c0 <= alpha_max {
        return 0;
    }
    let mut k0 = ((c0 / alpha_max).powf(1.0 / gamma) - 1.0).ceil().max(0.0) as u64;
    while k0 > 0 && c0 / (k0 as f64).powf(gamma) <= alpha_max {
        k0 -= 1;
    }
    while c0 / ((k0 + 1) as f64).powf(gamma) > alpha_max {
        k0 += 1;
    }
    k0
}

fn resolve_direction(direction: &Direction, instance: &LsaInstance) -> Result<UnitVector> {
    let d = instance.dim();
    let v = match direction {
        Direction::FeatureOfState(s) => {
            let td = instance
                .td()
                .ok_or_else(|| HarnessError::Config("feature_of_state needs a TD instance".into()))?;
            if *s >= td.features.n_states() {
                return Err(HarnessError::Config(format!(
                    "direction_state {s} out of range for {} states",
                    td.features.n_states()
                )));
            }
            td.features.phi(*s)
        }
        Direction::RandomUnit(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng))
        }
        Direction::Explicit(v) => DVector::from_column_slice(v),
    };
    if v.len() != d {
        return Err(HarnessError::Config(format!("direction has dimension {}, expected {d}", v.len())));
    }
    UnitVector::normalize(v).map_err(|e| HarnessError::Config(e.to_string()))
}
