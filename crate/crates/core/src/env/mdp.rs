use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;

/// A finite discounted MDP with a deterministic reward table.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    /// Row-major `[s][a][s']`.
    transition: Vec<f64>,
    /// Row-major `[s][a]`.
    reward: Vec<f64>,
    discount: f64,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidDimension("an MDP needs at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidDimension(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::InvalidDimension(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        check_discount(discount)?;
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            check_probability_row(row).map_err(|msg| {
                Error::InvalidParameter(format!(
                    "transition row (s={}, a={}): {msg}",
                    row_idx / n_actions,
                    row_idx % n_actions
                ))
            })?;
        }
        if let Some(r) = reward.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidParameter(format!("reward {r} outside [0, 1]")));
        }
        Ok(Self { n_states, n_actions, transition, reward, discount })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        check_discount(discount)?;
        self.discount = discount;
        Ok(self)
    }

    /// Successor distribution P(· | s, a).
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition_row(s, a)[next]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }
}

fn check_discount(discount: f64) -> Result<()> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidParameter(format!("discount {discount} outside [0, 1)")));
    }
    Ok(())
}

pub(crate) fn check_probability_row(row: &[f64]) -> std::result::Result<(), String> {
    if let Some(p) = row.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(format!("entry {p} is not a probability"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// A stationary stochastic policy π(a | s).
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::InvalidDimension(format!(
                "policy table of {} entries does not fit {n_states}x{n_actions}",
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_probability_row(row)
                .map_err(|msg| Error::InvalidParameter(format!("policy row {s}: {msg}")))?;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidDimension(format!("action {a} out of range")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Mixes in the uniform policy: (1 - eps) π + eps U.
    pub fn soften(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("mixing weight {eps} outside [0, 1]")));
        }
        let uniform = 1.0 / self.n_actions as f64;
        let probs = self.probs.iter().map(|p| (1.0 - eps) * p + eps * uniform).collect();
        Ok(Self { probs, ..self.clone() })
    }

    pub(crate) fn check_fits(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::InvalidDimension(format!(
                "policy is {}x{} but MDP has {} states and {} actions",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Random Garnet MDP: every (s, a) reaches exactly `branching` distinct
/// successors with probabilities given by the gaps between sorted uniform
/// cut points, and earns an i.i.d. U(0, 1) reward.
pub fn garnet_generate(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    discount: f64,
    seed: u64,
) -> Result<FiniteMdp> {
    if n_states == 0 || n_actions == 0 || branching == 0 {
        return Err(Error::InvalidDimension("Garnet counts must be positive".into()));
    }
    if branching > n_states {
        return Err(Error::InvalidDimension(format!(
            "branching {branching} exceeds the number of states {n_states}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![0.0; n_states * n_actions * n_states];
    let mut reward = vec![0.0; n_states * n_actions];
    let mut cuts = Vec::with_capacity(branching + 1);
    for s in 0..n_states {
        for a in 0..n_actions {
            let successors = rand::seq::index::sample(&mut rng, n_states, branching);
            let probs = loop {
                cuts.clear();
                cuts.extend((1..branching).map(|_| rng.random::<f64>()));
                cuts.push(0.0);
                cuts.push(1.0);
                cuts.sort_by(f64::total_cmp);
                let gaps: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
                if gaps.iter().all(|&g| g > 0.0) {
                    break gaps;
                }
            };
            let row = &mut transition[(s * n_actions + a) * n_states..][..n_states];
            for (next, p) in successors.iter().zip(probs) {
                row[next] = p;
            }
            // Gaps telescope to one only up to rounding.
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            reward[s * n_actions + a] = rng.random::<f64>();
        }
    }
    FiniteMdp::new(n_states, n_actions, transition, reward, discount)
}

/// Moves of the gridworld, in the usual left/down/right/up order.
pub const LAKE_ACTIONS: usize = 4;

/// Gridworld lake: start in the top-left tile, goal in the bottom-right,
/// holes sampled uniformly among the remaining tiles. Moves are
/// deterministic (bumping a wall stays put); entering the goal pays 1.
/// Holes and the goal are absorbing tiles that restart at the start tile on
/// the next step, so the state process is a single recurrent chain.
pub fn lake_generate(
    width: usize,
    height: usize,
    hole_fraction: f64,
    discount: f64,
    seed: u64,
) -> Result<FiniteMdp> {
    const MAX_ATTEMPTS: usize = 1000;
    let cells = width * height;
    if cells < 2 {
        return Err(Error::InvalidDimension(format!("a {width}x{height} lake has fewer than two tiles")));
    }
    if !(0.0..=0.5).contains(&hole_fraction) {
        return Err(Error::InvalidParameter(format!("hole fraction {hole_fraction} outside [0, 0.5]")));
    }
    let n_holes = (hole_fraction * (cells - 2) as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let holes = (0..MAX_ATTEMPTS)
        .map(|_| {
            let mut holes = vec![false; cells];
            for idx in rand::seq::index::sample(&mut rng, cells - 2, n_holes) {
                holes[idx + 1] = true;
            }
            holes
        })
        .find(|holes| layout_is_solvable(width, height, holes))
        .ok_or(Error::LayoutInfeasible { attempts: MAX_ATTEMPTS })?;

    let start = 0;
    let goal = cells - 1;
    let mut transition = vec![0.0; cells * LAKE_ACTIONS * cells];
    let mut reward = vec![0.0; cells * LAKE_ACTIONS];
    for s in 0..cells {
        for a in 0..LAKE_ACTIONS {
            let next = if s == goal || holes[s] { start } else { lake_move(width, height, s, a) };
            transition[(s * LAKE_ACTIONS + a) * cells + next] = 1.0;
            if next == goal && s != goal && !holes[s] {
                reward[s * LAKE_ACTIONS + a] = 1.0;
            }
        }
    }
    FiniteMdp::new(cells, LAKE_ACTIONS, transition, reward, discount)
}

fn lake_move(width: usize, height: usize, s: usize, action: usize) -> usize {
    let (row, col) = (s / width, s % width);
    match action {
        0 if col > 0 => s - 1,
        1 if row + 1 < height => s + width,
        2 if col + 1 < width => s + 1,
        3 if row > 0 => s - width,
        _ => s,
    }
}

/// The goal must be reachable from the start, and so must every other
/// tile; otherwise some tile carries no stationary mass.
fn layout_is_solvable(width: usize, height: usize, holes: &[bool]) -> bool {
    let cells = width * height;
    let goal = cells - 1;
    let mut seen = vec![false; cells];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(s) = queue.pop_front() {
        if s == goal || holes[s] {
            continue;
        }
        for a in 0..LAKE_ACTIONS {
            let next = lake_move(width, height, s, a);
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    seen.iter().all(|&v| v)
}

/// π(a | s) = U_a / Σ_i U_i with i.i.d. U(0, 1) draws.
pub fn random_policy(mdp: &FiniteMdp, seed: u64) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = mdp.n_actions();
    let mut probs = Vec::with_capacity(mdp.n_states() * na);
    for _ in 0..mdp.n_states() {
        let draws: Vec<f64> = (0..na).map(|_| rng.sample(Open01)).collect();
        let sum: f64 = draws.iter().sum();
        probs.extend(draws.iter().map(|u| u / sum));
    }
    Policy::new(mdp.n_states(), na, probs).expect("normalized uniform rows form a valid policy")
}

/// Exact value function V_π = (I - λ P_π)⁻¹ r_π.
pub fn exact_value_function(mdp: &FiniteMdp, policy: &Policy) -> Result<DVector<f64>> {
    policy.check_fits(mdp)?;
    let ns = mdp.n_states();
    let kernel = super::chain::policy_kernel(mdp, policy);
    let r_pi = DVector::from_fn(ns, |s, _| {
        (0..mdp.n_actions()).map(|a| policy.prob(s, a) * mdp.reward(s, a)).sum()
    });
    let system = DMatrix::identity(ns, ns) - kernel * mdp.discount();
    system
        .lu()
        .solve(&r_pi)
        .ok_or_else(|| Error::InvalidParameter("policy evaluation system is singular".into()))
}

/// Deterministic policy greedy with respect to the optimal value function,
/// found by exact policy iteration. An action only replaces the incumbent
/// when its action value is larger by more than `tol`.
pub fn greedy_policy(mdp: &FiniteMdp, tol: f64) -> Result<Policy> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let max_sweeps = ns * na + 100;
    let mut actions: Vec<usize> = (0..ns)
        .map(|s| argmax((0..na).map(|a| mdp.reward(s, a))))
        .collect();
    for _ in 0..max_sweeps {
        let policy = Policy::deterministic(na, &actions)?;
        let value = exact_value_function(mdp, &policy)?;
        let mut changed = false;
        for (s, current) in actions.iter_mut().enumerate() {
            let q = |a: usize| {
                let future: f64 = mdp.transition_row(s, a).iter().zip(value.iter()).map(|(p, v)| p * v).sum();
                mdp.reward(s, a) + mdp.discount() * future
            };
            let best = argmax((0..na).map(q));
            if q(best) > q(*current) + tol {
                *current = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(policy);
        }
    }
    Err(Error::NonConvergence { sweeps: max_sweeps })
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn garnet_rows_have_exactly_branching_successors() {
        let mdp = garnet_generate(6, 2, 3, 0.8, 11).unwrap();
        for s in 0..6 {
            for a in 0..2 {
                let row = mdp.transition_row(s, a);
                assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 3);
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!((0.0..=1.0).contains(&mdp.reward(s, a)));
            }
        }
    }

    #[test]
    fn garnet_single_state_is_absorbing() {
        let mdp = garnet_generate(1, 1, 1, 0.5, 3).unwrap();
        assert_eq!(mdp.transition_table(), &[1.0]);
    }

    #[test]
    fn garnet_is_deterministic_in_seed() {
        let a = garnet_generate(4, 2, 2, 0.8, 7).unwrap();
        let b = garnet_generate(4, 2, 2, 0.8, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.transition_table().iter().zip(b.transition_table()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, garnet_generate(4, 2, 2, 0.8, 8).unwrap());
    }

    #[test]
    fn garnet_rejects_bad_dimensions() {
        assert!(matches!(garnet_generate(3, 2, 4, 0.8, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(garnet_generate(0, 2, 1, 0.8, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(garnet_generate(3, 0, 1, 0.8, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(garnet_generate(3, 2, 0, 0.8, 0), Err(Error::InvalidDimension(_))));
        assert!(garnet_generate(3, 2, 2, 1.0, 0).is_err());
    }

    #[test]
    fn lake_eight_by_eight_restarts_from_goal() {
        let mdp = lake_generate(8, 8, 0.2, 0.9, 5).unwrap();
        assert_eq!(mdp.n_states(), 64);
        assert_eq!(mdp.n_actions(), 4);
        for a in 0..4 {
            let row = mdp.transition_row(63, a);
            assert_eq!(row[0], 1.0);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let holes = (1..63).filter(|&s| (0..4).all(|a| mdp.prob(s, a, 0) == 1.0)).count();
        assert_eq!(holes, 12);
    }

    #[test]
    fn lake_corridor_pays_on_entering_goal() {
        let mdp = lake_generate(1, 2, 0.0, 0.9, 0).unwrap();
        assert_eq!(mdp.n_states(), 2);
        // Action 1 moves down, into the goal.
        assert_eq!(mdp.prob(0, 1, 1), 1.0);
        assert_eq!(mdp.reward(0, 1), 1.0);
        for a in [0, 2, 3] {
            assert_eq!(mdp.prob(0, a, 0), 1.0);
            assert_eq!(mdp.reward(0, a), 0.0);
        }
    }

    #[test]
    fn lake_rewards_are_exactly_the_moves_into_goal() {
        let mdp = lake_generate(2, 2, 0.0, 0.9, 1).unwrap();
        for s in 0..4 {
            for a in 0..4 {
                let into_goal = s != 3 && mdp.prob(s, a, 3) == 1.0;
                assert_eq!(mdp.reward(s, a), if into_goal { 1.0 } else { 0.0 }, "s={s} a={a}");
            }
        }
        let paying: usize = mdp.reward_table().iter().filter(|&&r| r == 1.0).count();
        // From tile 1 moving down, from tile 2 moving right.
        assert_eq!(paying, 2);
    }

    #[test]
    fn lake_validates_inputs() {
        assert!(matches!(lake_generate(1, 1, 0.0, 0.9, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(lake_generate(4, 4, 0.6, 0.9, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn lake_reports_infeasible_layouts() {
        // A 1x4 corridor with a hole in either middle tile cuts the goal off.
        assert!(matches!(lake_generate(1, 4, 0.5, 0.9, 0), Err(Error::LayoutInfeasible { attempts: 1000 })));
    }

    #[test]
    fn random_policy_rows() {
        let mdp = garnet_generate(5, 1, 2, 0.8, 0).unwrap();
        let pol = random_policy(&mdp, 9);
        for s in 0..5 {
            assert_eq!(pol.row(s), &[1.0]);
        }
        let mdp = garnet_generate(5, 3, 2, 0.8, 0).unwrap();
        assert_eq!(random_policy(&mdp, 4), random_policy(&mdp, 4));
        let pol = random_policy(&mdp, 4);
        for s in 0..5 {
            assert!((pol.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(pol.row(s).iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn normalizing_two_draws() {
        let u = [0.3, 0.6];
        let sum: f64 = u.iter().sum();
        let row: Vec<f64> = u.iter().map(|x| x / sum).collect();
        let pol = Policy::new(1, 2, row).unwrap();
        assert!((pol.prob(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((pol.prob(0, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn greedy_walks_the_corridor() {
        let mdp = lake_generate(1, 2, 0.0, 0.9, 0).unwrap();
        let pol = greedy_policy(&mdp, 1e-12).unwrap();
        assert_eq!(pol.prob(0, 1), 1.0);
    }

    #[test]
    fn greedy_single_state_picks_best_reward() {
        let mdp = FiniteMdp::new(1, 3, vec![1.0; 3], vec![0.2, 0.9, 0.4], 0.5).unwrap();
        let pol = greedy_policy(&mdp, 1e-12).unwrap();
        assert_eq!(pol.row(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn greedy_dominates_random_on_garnets() {
        for seed in 0..20 {
            let mdp = garnet_generate(6, 2, 3, 0.8, seed).unwrap();
            let greedy = exact_value_function(&mdp, &greedy_policy(&mdp, 1e-12).unwrap()).unwrap();
            let random = exact_value_function(&mdp, &random_policy(&mdp, seed + 100)).unwrap();
            for s in 0..6 {
                assert!(greedy[s] >= random[s] - 1e-8, "seed {seed} state {s}");
            }
        }
    }

    #[test]
    fn value_function_of_single_state() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![0.5], 0.75).unwrap();
        let pol = Policy::new(1, 1, vec![1.0]).unwrap();
        let v = exact_value_function(&mdp, &pol).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constructor_validates_rows_and_rewards() {
        assert!(FiniteMdp::new(1, 1, vec![0.9], vec![0.5], 0.5).is_err());
        assert!(FiniteMdp::new(1, 1, vec![1.0], vec![1.5], 0.5).is_err());
        assert!(FiniteMdp::new(2, 1, vec![1.2, -0.2, 0.0, 1.0], vec![0.5, 0.5], 0.5).is_err());
        assert!(Policy::new(1, 2, vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn soften_mixes_uniform() {
        let pol = Policy::deterministic(4, &[2]).unwrap().soften(0.2).unwrap();
        assert!((pol.prob(0, 2) - 0.85).abs() < 1e-15);
        assert!((pol.prob(0, 0) - 0.05).abs() < 1e-15);
    }
}
