use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schedule::StepSchedule;
use crate::analysis::{GroundTruth, LsaInstance};
use crate::error::{Error, Result};
use crate::linalg::UnitVector;

/// Iterates beyond this magnitude are reported as a divergent run.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Where the observation chain starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChainStart {
    /// Z_0 drawn from the exact stationary law.
    #[default]
    Stationary,
    /// Z_0 = observation 0, advanced by `burn_in` discarded transitions.
    BurnIn(usize),
}

/// Stored LSA run: θ_0, …, θ_{n-1} (row-major, `dim` columns), the
/// Polyak–Ruppert average and the observation indices Z_0, …, Z_{n-1}.
/// θ_k is driven by Z_k for k ≥ 1.
#[derive(Clone, Debug)]
pub struct LsaTrajectory {
    iterates: Vec<f64>,
    dim: usize,
    pr_average: DVector<f64>,
    pub schedule: Option<StepSchedule>,
    pub seed: Option<u64>,
    pub observations: Vec<u32>,
}

impl LsaTrajectory {
    /// Wraps an arbitrary sequence of `dim`-vectors, e.g. a synthetic stream.
    pub fn from_iterates(iterates: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || iterates.is_empty() || !iterates.len().is_multiple_of(dim) {
            return Err(Error::InvalidDimension(format!(
                "{} values do not form rows of length {dim}",
                iterates.len()
            )));
        }
        let pr_average = compensated_mean(&iterates, dim);
        Ok(Self { iterates, dim, pr_average, schedule: None, seed: None, observations: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.iterates.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iterate(&self, k: usize) -> &[f64] {
        &self.iterates[k * self.dim..(k + 1) * self.dim]
    }

    /// All iterates, row-major.
    pub fn iterates(&self) -> &[f64] {
        &self.iterates
    }

    pub fn pr_average(&self) -> &DVector<f64> {
        &self.pr_average
    }

    /// uᵀθ_k for every k.
    pub fn projected(&self, u: &UnitVector) -> Vec<f64> {
        self.iterates.chunks_exact(self.dim).map(|row| u.project(row)).collect()
    }
}

/// Column means accumulated with Neumaier compensation.
fn compensated_mean(values: &[f64], dim: usize) -> DVector<f64> {
    let n = values.len() / dim;
    let mut sum = vec![0.0; dim];
    let mut comp = vec![0.0; dim];
    for row in values.chunks_exact(dim) {
        for j in 0..dim {
            let t = sum[j] + row[j];
            if sum[j].abs() >= row[j].abs() {
                comp[j] += (sum[j] - t) + row[j];
            } else {
                comp[j] += (row[j] - t) + sum[j];
            }
            sum[j] = t;
        }
    }
    DVector::from_iterator(dim, sum.iter().zip(&comp).map(|(s, c)| (s + c) / n as f64))
}

/// Simulation tables for repeated runs on one instance: flattened A(z),
/// b(z), cumulative successor distributions and the stationary CDF.
#[derive(Clone, Debug)]
pub struct LsaRunner {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    row_start: Vec<usize>,
    successors: Vec<u32>,
    cumulative: Vec<f64>,
    stationary_cdf: Vec<f64>,
    schedule: StepSchedule,
    steps: Vec<f64>,
}

impl LsaRunner {
    pub fn new(inst: &LsaInstance, schedule: StepSchedule) -> Self {
        let d = inst.dim();
        let nz = inst.n_observations();
        let mut a = Vec::with_capacity(nz * d * d);
        let mut b = Vec::with_capacity(nz * d);
        for z in 0..nz {
            let az = inst.a_of(z);
            for i in 0..d {
                for j in 0..d {
                    a.push(az[(i, j)]);
                }
            }
            b.extend(inst.b_of(z).iter());
        }
        let kernel = inst.z_kernel();
        let mut row_start = vec![0];
        let mut successors = Vec::new();
        let mut cumulative = Vec::new();
        for z in 0..nz {
            let mut acc = 0.0;
            for w in 0..nz {
                let p = kernel[(z, w)];
                if p > 0.0 {
                    acc += p;
                    successors.push(w as u32);
                    cumulative.push(acc);
                }
            }
            row_start.push(successors.len());
        }
        let stationary_cdf = inst
            .z_stationary()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Self { dim: d, a, b, row_start, successors, cumulative, stationary_cdf, schedule, steps: Vec::new() }
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    /// Precomputes α_1..α_{n-1} so repeated runs skip the `powf` calls.
    pub fn with_step_table(mut self, n: usize) -> Self {
        self.steps = self.schedule.table(n.saturating_sub(1));
        self
    }

    fn step(&self, k: usize) -> f64 {
        match self.steps.get(k - 1) {
            Some(&alpha) => alpha,
            None => self.schedule.step_size(k as u64),
        }
    }

    fn next_observation(&self, z: usize, rng: &mut ChaCha8Rng) -> usize {
        let lo = self.row_start[z];
        let hi = self.row_start[z + 1];
        let cum = &self.cumulative[lo..hi];
        let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
        let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.successors[lo + idx] as usize
    }

    fn initial_observation(&self, start: ChainStart, rng: &mut ChaCha8Rng) -> usize {
        match start {
            ChainStart::Stationary => {
                let cdf = &self.stationary_cdf;
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            }
            ChainStart::BurnIn(steps) => {
                let mut z = 0;
                for _ in 0..steps {
                    z = self.next_observation(z, rng);
                }
                z
            }
        }
    }

    /// Runs n - 1 LSA updates from θ_0 and keeps every iterate.
    pub fn run(&self, theta0: &[f64], n: usize, seed: u64, start: ChainStart) -> Result<LsaTrajectory> {
        let d = self.dim;
        if n < 2 {
            return Err(Error::InvalidParameter(format!("a run needs n ≥ 2, got {n}")));
        }
        if theta0.len() != d {
            return Err(Error::InvalidDimension(format!("θ_0 has length {}, expected {d}", theta0.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut iterates = Vec::with_capacity(n * d);
        let mut observations = Vec::with_capacity(n);
        iterates.extend_from_slice(theta0);
        let mut z = self.initial_observation(start, &mut rng);
        observations.push(z as u32);
        let mut theta = theta0.to_vec();
        let mut next = vec![0.0; d];
        for k in 1..n {
            z = self.next_observation(z, &mut rng);
            observations.push(z as u32);
            let alpha = self.step(k);
            let a = &self.a[z * d * d..(z + 1) * d * d];
            let b = &self.b[z * d..(z + 1) * d];
            let mut magnitude = 0.0_f64;
            for i in 0..d {
                let row = &a[i * d..(i + 1) * d];
                let mut residual = -b[i];
                for j in 0..d {
                    residual += row[j] * theta[j];
                }
                next[i] = theta[i] - alpha * residual;
                magnitude = magnitude.max(next[i].abs());
            }
            if !(magnitude <= DIVERGENCE_BOUND) {
                return Err(Error::Diverged { step: k, magnitude });
            }
            theta.copy_from_slice(&next);
            iterates.extend_from_slice(&theta);
        }
        let pr_average = compensated_mean(&iterates, d);
        Ok(LsaTrajectory { iterates, dim: d, pr_average, schedule: Some(self.schedule), seed: Some(seed), observations })
    }
}

/// One LSA run on `inst`; see [`LsaRunner`] for repeated runs.
pub fn run_lsa(
    inst: &LsaInstance,
    schedule: StepSchedule,
    n: usize,
    theta0: Option<&DVector<f64>>,
    seed: u64,
    start: ChainStart,
) -> Result<LsaTrajectory> {
    let zero = DVector::zeros(inst.dim());
    let theta0 = theta0.unwrap_or(&zero);
    LsaRunner::new(inst, schedule).run(theta0.as_slice(), n, seed, start)
}

/// √n · uᵀ(θ̄_n - θ⋆).
pub fn pr_error_projection(traj: &LsaTrajectory, gt: &GroundTruth, u: &UnitVector) -> f64 {
    let diff = traj.pr_average() - &gt.theta_star;
    (traj.n() as f64).sqrt() * u.as_vector().dot(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_td_instance, ground_truth, td_stability_constants};
    use crate::env::{garnet_generate, random_features, random_policy};
    use nalgebra::DMatrix;

    fn scalar_instance(a: f64, b: f64) -> LsaInstance {
        LsaInstance::iid(
            DVector::from_vec(vec![0.4, 0.6]),
            vec![DMatrix::from_element(1, 1, a); 2],
            vec![DVector::from_element(1, b); 2],
        )
        .unwrap()
    }

    fn garnet(seed: u64) -> LsaInstance {
        let mdp = garnet_generate(6, 2, 3, 0.8, seed).unwrap();
        build_td_instance(&mdp, &random_policy(&mdp, seed + 1), &random_features(6, 2, seed + 2).unwrap()).unwrap()
    }

    #[test]
    fn fixed_point_is_preserved_without_noise() {
        let inst = LsaInstance::iid(
            DVector::from_vec(vec![0.5, 0.5]),
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 0.9]); 2],
            vec![DVector::from_vec(vec![0.3, -0.4]); 2],
        )
        .unwrap();
        let sched = StepSchedule::new(0.5, 0, 0.6).unwrap();
        let traj = run_lsa(&inst, sched, 500, Some(inst.theta_star()), 3, ChainStart::Stationary).unwrap();
        for k in 0..traj.n() {
            for (x, y) in traj.iterate(k).iter().zip(inst.theta_star().iter()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_recursion_matches_product() {
        let inst = scalar_instance(1.0, 0.0);
        let sched = StepSchedule::new(0.7, 2, 0.55).unwrap();
        let traj = run_lsa(&inst, sched, 1000, Some(&DVector::from_element(1, 1.0)), 9, ChainStart::Stationary).unwrap();
        let mut product = 1.0;
        for k in 0..traj.n() {
            if k > 0 {
                product *= 1.0 - sched.step_size(k as u64);
            }
            assert!((traj.iterate(k)[0] - product).abs() <= 1e-12 * product.abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn runs_are_deterministic_in_the_seed() {
        let inst = garnet(5);
        let sched = StepSchedule::new(0.05, 0, 0.6).unwrap();
        let runner = LsaRunner::new(&inst, sched).with_step_table(2000);
        let a = runner.run(&[0.0, 0.0], 2000, 42, ChainStart::Stationary).unwrap();
        let b = runner.run(&[0.0, 0.0], 2000, 42, ChainStart::Stationary).unwrap();
        let c = run_lsa(&inst, sched, 2000, None, 42, ChainStart::Stationary).unwrap();
        assert_eq!(a.iterates(), b.iterates());
        assert_eq!(a.iterates(), c.iterates());
        assert_eq!(a.observations, b.observations);
        let other = runner.run(&[0.0, 0.0], 2000, 43, ChainStart::Stationary).unwrap();
        assert_ne!(a.iterates(), other.iterates());
    }

    #[test]
    fn pr_average_identity() {
        let inst = garnet(6);
        let traj = run_lsa(&inst, StepSchedule::new(0.05, 0, 0.6).unwrap(), 5000, None, 1, ChainStart::BurnIn(50)).unwrap();
        let mut naive = DVector::zeros(2);
        for k in 0..traj.n() {
            naive += DVector::from_column_slice(traj.iterate(k));
        }
        naive /= traj.n() as f64;
        // Streaming update θ̄_k = θ̄_{k-1} + (θ_k - θ̄_{k-1})/k.
        let mut online = DVector::zeros(2);
        for k in 0..traj.n() {
            online += (DVector::from_column_slice(traj.iterate(k)) - &online) / (k + 1) as f64;
        }
        for j in 0..2 {
            let scale = traj.pr_average()[j].abs().max(1e-300);
            assert!((traj.pr_average()[j] - naive[j]).abs() <= 1e-12 * scale);
            assert!((traj.pr_average()[j] - online[j]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn observations_follow_the_kernel() {
        let inst = garnet(8);
        let traj = run_lsa(&inst, StepSchedule::new(0.05, 0, 0.6).unwrap(), 3000, None, 2, ChainStart::Stationary).unwrap();
        assert_eq!(traj.observations.len(), 3000);
        for w in traj.observations.windows(2) {
            assert!(inst.z_kernel()[(w[0] as usize, w[1] as usize)] > 0.0);
        }
    }

    #[test]
    fn divergent_step_size_is_reported() {
        let inst = scalar_instance(1.0, 1.0);
        let sched = StepSchedule::new(50.0, 0, 0.5).unwrap();
        let err = run_lsa(&inst, sched, 1000, None, 0, ChainStart::Stationary).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn projection_examples() {
        let traj = LsaTrajectory::from_iterates(vec![0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0], 2).unwrap();
        let inst = scalar_instance(1.0, 0.0);
        let mut gt = ground_truth(&inst).unwrap();
        gt.theta_star = DVector::zeros(2);
        let u = UnitVector::basis(2, 0);
        assert!((pr_error_projection(&traj, &gt, &u) - 1.0).abs() < 1e-15);
        assert!((pr_error_projection(&traj, &gt, &-&u) + 1.0).abs() < 1e-15);
        gt.theta_star = traj.pr_average().clone();
        assert_eq!(pr_error_projection(&traj, &gt, &u), 0.0);
    }

    #[test]
    fn garnet_error_shrinks_with_n() {
        let inst = garnet(10);
        let gt = ground_truth(&inst).unwrap();
        let c = td_stability_constants(&inst).unwrap();
        let sched = StepSchedule::new(c.alpha_max, 0, 0.6).unwrap();
        let runner = LsaRunner::new(&inst, sched).with_step_table(100_000);
        let median_error = |n: usize| {
            let mut errs: Vec<f64> = (0..50)
                .map(|s| {
                    let traj = runner.run(&[0.0, 0.0], n, 1000 + s, ChainStart::Stationary).unwrap();
                    (traj.pr_average() - &gt.theta_star).norm()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            (errs[24] + errs[25]) / 2.0
        };
        let e: Vec<f64> = [1_000, 10_000, 100_000].iter().map(|&n| median_error(n)).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }
}
