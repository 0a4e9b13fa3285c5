//! TOML experiment configuration: parsing, dotted overrides, validation and
//! the provenance hash written into every CSV header.

use std::path::{Path, PathBuf};

use lsa_core::inference::ObmConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    env: RawEnv,
    #[serde(default)]
    features: RawFeatures,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    bootstrap: RawBootstrap,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    kind: Option<String>,
    n_states: Option<usize>,
    n_actions: Option<usize>,
    branching: Option<usize>,
    width: Option<usize>,
    height: Option<usize>,
    hole_fraction: Option<f64>,
    path: Option<PathBuf>,
    discount: Option<f64>,
    policy: Option<String>,
    policy_epsilon: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatures {
    dim: Option<usize>,
    seed: Option<u64>,
    direction: Option<String>,
    direction_state: Option<usize>,
    direction_seed: Option<u64>,
    direction_vector: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    gamma: Option<f64>,
    c0: Option<f64>,
    k0: Option<u64>,
    burn_in: Option<usize>,
    theta0: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    n_grid: Option<Vec<usize>>,
    replicates: Option<usize>,
    levels: Option<Vec<f64>>,
    base_seed: Option<u64>,
    threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBootstrap {
    block_rule: Option<String>,
    block_len: Option<usize>,
    block_lens: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EnvSpec {
    Garnet { n_states: usize, n_actions: usize, branching: usize },
    Lake { width: usize, height: usize, hole_fraction: f64 },
    /// An environment document written by `gen-env`.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FeatureOfState(usize),
    RandomUnit(u64),
    Explicit(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaStart {
    Zero,
    ThetaStar,
}

/// Block length per grid point: a rule, or explicit lengths aligned with the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockChoice {
    Rule(ObmConfig),
    PerN(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub discount: f64,
    pub policy: PolicyKind,
    pub policy_epsilon: f64,
    pub env_seed: u64,
    pub feature_dim: usize,
    pub feature_seed: u64,
    pub direction: Direction,
    pub gamma: f64,
    pub c0: Option<f64>,
    pub k0: Option<u64>,
    pub burn_in: Option<usize>,
    pub theta0: ThetaStart,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub levels: Vec<f64>,
    pub base_seed: u64,
    /// Worker count; 0 means one per available core. Excluded from the hash.
    #[serde(skip)]
    pub threads: usize,
    pub block: BlockChoice,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table: toml::Table = text.parse().map_err(|e| invalid(format!("TOML parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let raw: RawConfig = toml::Value::Table(table).try_into().map_err(|e| invalid(format!("{e}")))?;
        Self::validate(raw)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        // Relative environment paths are resolved against the config file.
        if let EnvSpec::File { path: env_path } = &mut cfg.env {
            if env_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *env_path = dir.join(&*env_path);
                }
            }
        }
        Ok(cfg)
    }

    fn validate(raw: RawConfig) -> Result<Self, HarnessError> {
        let RawConfig { env, features, schedule, experiment, bootstrap } = raw;

        let kind = env.kind.as_deref().unwrap_or("garnet");
        let env_spec = match kind {
            "garnet" => EnvSpec::Garnet {
                n_states: env.n_states.unwrap_or(6),
                n_actions: env.n_actions.unwrap_or(2),
                branching: env.branching.unwrap_or(3),
            },
            "lake" => EnvSpec::Lake {
                width: env.width.unwrap_or(4),
                height: env.height.unwrap_or(4),
                hole_fraction: env.hole_fraction.unwrap_or(0.2),
            },
            "file" => EnvSpec::File { path: env.path.ok_or_else(|| invalid("env.kind = \"file\" needs env.path"))? },
            other => return Err(invalid(format!("unknown env.kind {other:?}"))),
        };
        let discount = env.discount.unwrap_or(0.8);
        if !(0.0..1.0).contains(&discount) {
            return Err(invalid(format!("env.discount = {discount} outside [0, 1)")));
        }
        let policy = match env.policy.as_deref().unwrap_or("random") {
            "random" => PolicyKind::Random,
            "greedy" => PolicyKind::Greedy,
            other => return Err(invalid(format!("unknown env.policy {other:?}"))),
        };
        let policy_epsilon = env.policy_epsilon.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&policy_epsilon) {
            return Err(invalid(format!("env.policy_epsilon = {policy_epsilon} outside [0, 1]")));
        }
        let env_seed = env.seed.unwrap_or(1);

        let feature_dim = features.dim.unwrap_or(2);
        if feature_dim == 0 {
            return Err(invalid("features.dim must be positive"));
        }
        let direction = match features.direction.as_deref().unwrap_or("feature_of_state") {
            "feature_of_state" => Direction::FeatureOfState(features.direction_state.unwrap_or(0)),
            "random_unit" => Direction::RandomUnit(features.direction_seed.unwrap_or(0)),
            "explicit" => {
                let v = features
                    .direction_vector
                    .ok_or_else(|| invalid("features.direction = \"explicit\" needs features.direction_vector"))?;
                if v.len() != feature_dim {
                    return Err(invalid(format!("direction_vector has {} entries, features.dim is {feature_dim}", v.len())));
                }
                Direction::Explicit(v)
            }
            other => return Err(invalid(format!("unknown features.direction {other:?}"))),
        };

        let gamma = schedule.gamma.unwrap_or(0.6);
        if !(0.5..1.0).contains(&gamma) {
            return Err(invalid(format!("schedule.gamma = {gamma} outside [1/2, 1)")));
        }
        if let Some(c0) = schedule.c0 {
            if !(c0 > 0.0 && c0.is_finite()) {
                return Err(invalid(format!("schedule.c0 = {c0} must be positive")));
            }
        }
        let theta0 = match schedule.theta0.as_deref().unwrap_or("zero") {
            "zero" => ThetaStart::Zero,
            "theta_star" => ThetaStart::ThetaStar,
            other => return Err(invalid(format!("unknown schedule.theta0 {other:?}"))),
        };

        let n_grid = experiment.n_grid.unwrap_or_else(|| vec![1600, 6400, 25600, 102400]);
        if n_grid.is_empty() {
            return Err(invalid("experiment.n_grid is empty"));
        }
        if n_grid[0] < 4 {
            return Err(invalid("experiment.n_grid entries must be at least 4"));
        }
        if n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("experiment.n_grid must be strictly increasing"));
        }
        let replicates = experiment.replicates.unwrap_or(1000);
        if replicates == 0 {
            return Err(invalid("experiment.replicates must be at least 1"));
        }
        let levels = experiment.levels.unwrap_or_else(|| vec![0.8, 0.9, 0.95]);
        if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(invalid("experiment.levels must be non-empty and inside (0, 1)"));
        }

        let block = match (bootstrap.block_rule.as_deref(), bootstrap.block_len, bootstrap.block_lens) {
            (_, Some(_), Some(_)) => return Err(invalid("give bootstrap.block_len or bootstrap.block_lens, not both")),
            (Some("explicit") | None, None, Some(lens)) => {
                if lens.len() != n_grid.len() {
                    return Err(invalid("bootstrap.block_lens must align with experiment.n_grid"));
                }
                BlockChoice::PerN(lens)
            }
            (Some("explicit"), Some(b), None) | (None, Some(b), None) => BlockChoice::Rule(ObmConfig::Explicit(b)),
            (Some("explicit"), None, None) => return Err(invalid("block_rule = \"explicit\" needs block_len")),
            (Some("pow45"), None, None) | (None, None, None) => BlockChoice::Rule(ObmConfig::Pow45),
            (Some("pow34"), None, None) => BlockChoice::Rule(ObmConfig::Pow34),
            (Some(rule @ ("pow45" | "pow34")), _, _) => {
                return Err(invalid(format!("block_rule = {rule:?} takes no explicit lengths")))
            }
            (Some(other), _, _) => return Err(invalid(format!("unknown bootstrap.block_rule {other:?}"))),
        };

        Ok(Self {
            env: env_spec,
            discount,
            policy,
            policy_epsilon,
            env_seed,
            feature_dim,
            feature_seed: features.seed.unwrap_or(env_seed.wrapping_add(2)),
            direction,
            gamma,
            c0: schedule.c0,
            k0: schedule.k0,
            burn_in: schedule.burn_in,
            theta0,
            n_grid,
            replicates,
            levels,
            base_seed: experiment.base_seed.unwrap_or(0),
            threads: experiment.threads.unwrap_or(0),
            block,
        })
    }

    /// SHA-256 prefix of the canonical JSON form; the thread count is excluded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Sets `a.b.c = value` in the table; the value is read as a TOML literal,
/// falling back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), HarnessError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {spec:?} is not key=value")))?;
    let value_text = value.trim();
    let value = format!("v = {value_text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value_text.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("override key {key:?} is malformed")));
    }
    let (last, parents) = parts.split_last().expect("non-empty split");
    let mut current = table;
    for part in parents {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override path {key:?} crosses a non-table value")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[env]
kind = "garnet"
seed = 25

[schedule]
gamma = 0.6
c0 = 1.0

[experiment]
n_grid = [100, 200]
replicates = 10
base_seed = 5
threads = 2

[bootstrap]
block_rule = "pow34"
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE, &[]).unwrap();
        assert_eq!(cfg.env, EnvSpec::Garnet { n_states: 6, n_actions: 2, branching: 3 });
        assert_eq!(cfg.env_seed, 25);
        assert_eq!(cfg.feature_seed, 27);
        assert_eq!(cfg.block, BlockChoice::Rule(ObmConfig::Pow34));
        assert_eq!(cfg.levels, vec![0.8, 0.9, 0.95]);
        assert_eq!(cfg.direction, Direction::FeatureOfState(0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("[env]\nnstates = 3\n", &[]).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        assert!(ExperimentConfig::from_toml_str("[extra]\nx = 1\n", &[]).is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        for bad in [
            "[experiment]\nreplicates = 0\n",
            "[experiment]\nn_grid = [200, 100]\n",
            "[experiment]\nn_grid = [100, 100]\n",
            "[experiment]\nlevels = [1.0]\n",
            "[schedule]\ngamma = 1.0\n",
            "[env]\ndiscount = 1.0\n",
            "[bootstrap]\nblock_rule = \"explicit\"\n",
            "[features]\ndirection = \"explicit\"\ndirection_vector = [1.0]\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad, &[]).is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides_use_dotted_paths() {
        let cfg = ExperimentConfig::from_toml_str(
            SAMPLE,
            &["experiment.replicates=77".into(), "env.policy = greedy".into(), "bootstrap.block_rule=\"pow45\"".into()],
        )
        .unwrap();
        assert_eq!(cfg.replicates, 77);
        assert_eq!(cfg.policy, PolicyKind::Greedy);
        assert_eq!(cfg.block, BlockChoice::Rule(ObmConfig::Pow45));
        assert!(ExperimentConfig::from_toml_str(SAMPLE, &["experiment".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str(SAMPLE, &["env.seed.x=1".into()]).is_err());
    }

    #[test]
    fn hash_ignores_threads_only() {
        let a = ExperimentConfig::from_toml_str(SAMPLE, &[]).unwrap();
        let b = ExperimentConfig::from_toml_str(SAMPLE, &["experiment.threads=8".into()]).unwrap();
        let c = ExperimentConfig::from_toml_str(SAMPLE, &["experiment.base_seed=6".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn per_n_block_lengths_align_with_the_grid() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE, &["bootstrap.block_rule=\"explicit\"".into(), "bootstrap.block_lens=[10, 20]".into()])
            .unwrap();
        assert_eq!(cfg.block, BlockChoice::PerN(vec![10, 20]));
        assert!(ExperimentConfig::from_toml_str(SAMPLE, &["bootstrap.block_rule=\"explicit\"".into(), "bootstrap.block_lens=[10]".into()]).is_err());
    }
}
