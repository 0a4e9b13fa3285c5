use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use super::mdp::{FiniteMdp, Policy};
use crate::error::{Error, Result};
use crate::linalg;

/// JSON document holding an environment, optionally with a policy and a
/// feature map. Floats are written in shortest round-trip form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    /// `[s][a][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `[s][a]`
    pub reward: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
}

impl EnvDocument {
    pub fn from_parts(mdp: &FiniteMdp, policy: Option<&Policy>, features: Option<&FeatureMap>) -> Self {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        Self {
            n_states: ns,
            n_actions: na,
            discount: mdp.discount(),
            transition: (0..ns)
                .map(|s| (0..na).map(|a| mdp.transition_row(s, a).to_vec()).collect())
                .collect(),
            reward: mdp.reward_table().chunks(na).map(<[f64]>::to_vec).collect(),
            policy: policy.map(|p| (0..p.n_states()).map(|s| p.row(s).to_vec()).collect()),
            features: features.map(|f| linalg::to_rows(f.matrix())),
        }
    }

    pub fn mdp(&self) -> Result<FiniteMdp> {
        let (ns, na) = (self.n_states, self.n_actions);
        if self.transition.len() != ns
            || self.transition.iter().any(|r| r.len() != na || r.iter().any(|p| p.len() != ns))
        {
            return Err(Error::Document(format!("transition must be shaped [{ns}][{na}][{ns}]")));
        }
        if self.reward.len() != ns || self.reward.iter().any(|r| r.len() != na) {
            return Err(Error::Document(format!("reward must be shaped [{ns}][{na}]")));
        }
        let transition = self.transition.iter().flatten().flatten().copied().collect();
        let reward = self.reward.iter().flatten().copied().collect();
        FiniteMdp::new(ns, na, transition, reward, self.discount)
    }

    pub fn policy(&self) -> Result<Option<Policy>> {
        self.policy
            .as_ref()
            .map(|rows| {
                if rows.len() != self.n_states || rows.iter().any(|r| r.len() != self.n_actions) {
                    return Err(Error::Document("policy must be shaped [n_states][n_actions]".into()));
                }
                Policy::new(self.n_states, self.n_actions, rows.iter().flatten().copied().collect())
            })
            .transpose()
    }

    pub fn features(&self) -> Result<Option<FeatureMap>> {
        self.features
            .as_ref()
            .map(|rows| {
                let m = linalg::from_rows(rows).ok_or_else(|| Error::Document("ragged feature rows".into()))?;
                if m.nrows() != self.n_states {
                    return Err(Error::Document("features need one row per state".into()));
                }
                FeatureMap::new(m)
            })
            .transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
