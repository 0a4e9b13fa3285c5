use nalgebra::{DMatrix, DVector};

use crate::env::{self, induce_chain, FeatureMap, FiniteMdp, Policy};
use crate::error::{Error, Result};
use crate::linalg;

/// Ā must be at least this well conditioned for θ⋆ to count as identified.
pub const MAX_CONDITION: f64 = 1e12;

/// One observation z = (s, a, s') of the TD observation chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next: usize,
}

/// Provenance of a TD(0) instance: what the observation chain was built from.
#[derive(Clone, Debug)]
pub struct TdStructure {
    pub observations: Vec<Transition>,
    pub state_stationary: DVector<f64>,
    pub state_mixing_time: Option<usize>,
    pub features: FeatureMap,
    pub discount: f64,
}

impl TdStructure {
    pub fn design_matrix(&self) -> DMatrix<f64> {
        self.features.design_matrix(&self.state_stationary)
    }
}

/// A linear stochastic approximation problem driven by a finite Markov
/// chain Z with observation maps z ↦ (A(z), b(z)).
#[derive(Clone, Debug)]
pub struct LsaInstance {
    z_kernel: DMatrix<f64>,
    z_stationary: DVector<f64>,
    per_z_a: Vec<DMatrix<f64>>,
    per_z_b: Vec<DVector<f64>>,
    a_bar: DMatrix<f64>,
    b_bar: DVector<f64>,
    theta_star: DVector<f64>,
    /// Row z holds ε(z) = (A(z) - Ā)θ⋆ - (b(z) - b̄).
    noise_table: DMatrix<f64>,
    td: Option<TdStructure>,
}

impl LsaInstance {
    /// Builds an instance from explicit observation tables. The stationary
    /// distribution of `z_kernel` is solved for when not supplied.
    pub fn new(
        z_kernel: DMatrix<f64>,
        z_stationary: Option<DVector<f64>>,
        per_z_a: Vec<DMatrix<f64>>,
        per_z_b: Vec<DVector<f64>>,
    ) -> Result<Self> {
        env::check_stochastic(&z_kernel)?;
        let n_obs = z_kernel.nrows();
        if per_z_a.len() != n_obs || per_z_b.len() != n_obs {
            return Err(Error::InvalidDimension(format!(
                "{n_obs} observations but {} A-tables and {} b-tables",
                per_z_a.len(),
                per_z_b.len()
            )));
        }
        let dim = per_z_b[0].len();
        if dim == 0 || per_z_a.iter().any(|a| a.shape() != (dim, dim)) || per_z_b.iter().any(|b| b.len() != dim) {
            return Err(Error::InvalidDimension("observation tables disagree on the dimension".into()));
        }
        let z_stationary = match z_stationary {
            Some(mu) => {
                if mu.len() != n_obs || mu.iter().any(|&m| m < 0.0) || (mu.sum() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("supplied stationary law is not a distribution".into()));
                }
                mu
            }
            None => env::stationary_distribution(&z_kernel)?,
        };
        let mut a_bar = DMatrix::zeros(dim, dim);
        let mut b_bar = DVector::zeros(dim);
        for ((a, b), &w) in per_z_a.iter().zip(&per_z_b).zip(z_stationary.iter()) {
            a_bar += a * w;
            b_bar += b * w;
        }
        let condition = linalg::condition_number(&a_bar);
        if !(condition < MAX_CONDITION) {
            return Err(Error::SingularSystem { condition });
        }
        let theta_star = a_bar.clone().lu().solve(&b_bar).ok_or(Error::SingularSystem { condition })?;
        let mut noise_table = DMatrix::zeros(n_obs, dim);
        for z in 0..n_obs {
            let eps = (&per_z_a[z] - &a_bar) * &theta_star - (&per_z_b[z] - &b_bar);
            noise_table.set_row(z, &eps.transpose());
        }
        Ok(Self { z_kernel, z_stationary, per_z_a, per_z_b, a_bar, b_bar, theta_star, noise_table, td: None })
    }

    /// Observations drawn i.i.d. from `law`: every kernel row equals `law`.
    pub fn iid(law: DVector<f64>, per_z_a: Vec<DMatrix<f64>>, per_z_b: Vec<DVector<f64>>) -> Result<Self> {
        let n = law.len();
        let kernel = DMatrix::from_fn(n, n, |_, j| law[j]);
        Self::new(kernel, Some(law), per_z_a, per_z_b)
    }

    pub fn dim(&self) -> usize {
        self.b_bar.len()
    }

    pub fn n_observations(&self) -> usize {
        self.z_kernel.nrows()
    }

    pub fn z_kernel(&self) -> &DMatrix<f64> {
        &self.z_kernel
    }

    pub fn z_stationary(&self) -> &DVector<f64> {
        &self.z_stationary
    }

    pub fn a_of(&self, z: usize) -> &DMatrix<f64> {
        &self.per_z_a[z]
    }

    pub fn b_of(&self, z: usize) -> &DVector<f64> {
        &self.per_z_b[z]
    }

    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    pub fn b_bar(&self) -> &DVector<f64> {
        &self.b_bar
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn noise_table(&self) -> &DMatrix<f64> {
        &self.noise_table
    }

    /// ε(z) as a column vector.
    pub fn noise(&self, z: usize) -> DVector<f64> {
        self.noise_table.row(z).transpose()
    }

    /// sup_z ‖ε(z)‖ over the finite observation space.
    pub fn noise_sup_norm(&self) -> f64 {
        self.noise_table.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// sup_z ‖A(z)‖ ∨ sup_z ‖A(z) - Ā‖ in spectral norm.
    pub fn a_sup_norm(&self) -> f64 {
        self.per_z_a
            .iter()
            .map(|a| linalg::spectral_norm(a).max(linalg::spectral_norm(&(a - &self.a_bar))))
            .fold(0.0, f64::max)
    }

    pub fn td(&self) -> Option<&TdStructure> {
        self.td.as_ref()
    }

    /// Mixing time of the observation chain Z (search capped at 10·|Z|²).
    pub fn z_mixing_time(&self) -> Option<usize> {
        let n = self.n_observations();
        env::mixing_time(&self.z_kernel, 10 * n * n)
    }
}

/// TD(0) with linear features as an LSA instance on Z = (s, a, s'):
/// A(z) = φ(s){φ(s) - λφ(s')}ᵀ and b(z) = φ(s) r(s, a).
pub fn build_td_instance(mdp: &FiniteMdp, policy: &Policy, features: &FeatureMap) -> Result<LsaInstance> {
    if features.n_states() != mdp.n_states() {
        return Err(Error::InvalidDimension(format!(
            "feature map covers {} states, MDP has {}",
            features.n_states(),
            mdp.n_states()
        )));
    }
    let chain = induce_chain(mdp, policy)?;
    let discount = mdp.discount();

    let mut observations = Vec::new();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            for next in 0..mdp.n_states() {
                if policy.prob(s, a) * mdp.prob(s, a, next) > 0.0 {
                    observations.push(Transition { state: s, action: a, next });
                }
            }
        }
    }
    let n_obs = observations.len();
    // Observations grouped by their current state, for the kernel rows.
    let mut leaving: Vec<Vec<usize>> = vec![Vec::new(); mdp.n_states()];
    for (z, t) in observations.iter().enumerate() {
        leaving[t.state].push(z);
    }
    let mut z_kernel = DMatrix::zeros(n_obs, n_obs);
    for (z, t) in observations.iter().enumerate() {
        for &w in &leaving[t.next] {
            let u = observations[w];
            z_kernel[(z, w)] = policy.prob(u.state, u.action) * mdp.prob(u.state, u.action, u.next);
        }
        let mut row = z_kernel.row_mut(z);
        let sum: f64 = row.iter().sum();
        row /= sum;
    }
    let mut z_stationary = DVector::from_fn(n_obs, |z, _| {
        let t = observations[z];
        chain.stationary[t.state] * policy.prob(t.state, t.action) * mdp.prob(t.state, t.action, t.next)
    });
    let total = z_stationary.sum();
    z_stationary /= total;

    let mut per_z_a = Vec::with_capacity(n_obs);
    let mut per_z_b = Vec::with_capacity(n_obs);
    for t in &observations {
        let phi = features.phi(t.state);
        let phi_next = features.phi(t.next);
        per_z_a.push(&phi * (&phi - &phi_next * discount).transpose());
        per_z_b.push(&phi * mdp.reward(t.state, t.action));
    }
    let mut inst = LsaInstance::new(z_kernel, Some(z_stationary), per_z_a, per_z_b)?;
    inst.td = Some(TdStructure {
        observations,
        state_stationary: chain.stationary,
        state_mixing_time: chain.mixing_time,
        features: features.clone(),
        discount,
    });
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{garnet_generate, random_features, random_policy};

    fn garnet_instance(seed: u64, discount: f64) -> LsaInstance {
        let mdp = garnet_generate(6, 2, 3, discount, seed).unwrap();
        let pol = random_policy(&mdp, seed + 1);
        let fm = random_features(6, 2, seed + 2).unwrap();
        build_td_instance(&mdp, &pol, &fm).unwrap()
    }

    #[test]
    fn garnet_observation_space_is_bounded_by_branching() {
        let inst = garnet_instance(3, 0.8);
        assert!(inst.n_observations() <= 36);
        assert_eq!(inst.dim(), 2);
    }

    #[test]
    fn stationary_averages_and_centered_noise() {
        let inst = garnet_instance(5, 0.8);
        let mut a = DMatrix::zeros(2, 2);
        let mut eps = DVector::zeros(2);
        for z in 0..inst.n_observations() {
            a += inst.a_of(z) * inst.z_stationary()[z];
            eps += inst.noise(z) * inst.z_stationary()[z];
        }
        assert!((a - inst.a_bar()).amax() <= 1e-10);
        assert!(eps.amax() <= 1e-10);
        // The supplied product-form law is the kernel's left fixed point.
        let lhs = inst.z_kernel().transpose() * inst.z_stationary();
        assert!((lhs - inst.z_stationary()).amax() <= 1e-10);
    }

    #[test]
    fn zero_discount_recovers_design_matrix() {
        let inst = garnet_instance(8, 0.0);
        let design = inst.td().unwrap().design_matrix();
        assert!((inst.a_bar() - design).amax() < 1e-12);
    }

    #[test]
    fn single_state_is_a_geometric_series() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![0.3], 0.75).unwrap();
        let pol = Policy::new(1, 1, vec![1.0]).unwrap();
        let fm = FeatureMap::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let inst = build_td_instance(&mdp, &pol, &fm).unwrap();
        assert!((inst.a_bar()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((inst.b_bar()[0] - 0.3).abs() < 1e-15);
        assert!((inst.theta_star()[0] - 1.2).abs() < 1e-14);
    }

    #[test]
    fn reducible_chain_propagates() {
        // Two absorbing states.
        let mdp = FiniteMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.1, 0.2], 0.5).unwrap();
        let pol = Policy::new(2, 1, vec![1.0, 1.0]).unwrap();
        let fm = random_features(2, 1, 0).unwrap();
        assert!(matches!(build_td_instance(&mdp, &pol, &fm), Err(Error::ReducibleChain(_))));
    }

    #[test]
    fn singular_mean_matrix_is_rejected() {
        let law = DVector::from_vec(vec![0.5, 0.5]);
        let a = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)];
        let b = vec![DVector::zeros(2), DVector::zeros(2)];
        assert!(matches!(LsaInstance::iid(law, a, b), Err(Error::SingularSystem { .. })));
    }
}
