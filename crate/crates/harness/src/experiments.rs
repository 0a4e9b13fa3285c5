//! Monte Carlo drivers. Every replicate draws its own seed from
//! `derive_seed(base_seed, [n, i])` and results land in index-addressed
//! slots, so the CSV output does not depend on the worker count.

use std::io::Write;

use lsa_core::analysis::finite_n_variance;
use lsa_core::inference::{
    confidence_interval, coverage_from_hits, kolmogorov_distance, obm_noise_variance, obm_variance, quartiles,
    resolve_block, CiMethod, ObmConfig, ObmEstimate,
};
use lsa_core::lsa::{pr_error_projection, LsaRunner};
use lsa_core::normal;
use lsa_core::seed::derive_seed;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{BlockChoice, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::problem::Problem;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const KOLMOGOROV_COLUMNS: &str = "n,replicates,b_n,kd_limit,kd_finite_n,kd_obm_median,kd_obm_q25,kd_obm_q75";
pub const COVERAGE_COLUMNS: &str = "n,b_n,level,coverage_obm,stderr_obm,coverage_oracle,stderr_oracle";
pub const VARIANCE_COLUMNS: &str = "n,b_n,abs_err_median,abs_err_q25,abs_err_q75,remainder_median";

/// Outcome of one simulated trajectory.
#[derive(Clone, Copy, Debug)]
struct Replicate {
    /// √n uᵀ(θ̄_n − θ⋆)
    delta: f64,
    /// uᵀθ̄_n
    center: f64,
    /// OBM estimate σ̂²_θ(u)
    obm: f64,
    /// OBM estimate on the oracle noise sequence, when requested
    noise_obm: f64,
}

pub fn thread_pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Block length used at grid position `idx`.
pub fn block_for(cfg: &ExperimentConfig, idx: usize, n: usize) -> Result<usize> {
    let rule = match &cfg.block {
        BlockChoice::Rule(rule) => *rule,
        BlockChoice::PerN(lens) => ObmConfig::Explicit(lens[idx]),
    };
    Ok(resolve_block(rule, n)?)
}

fn simulate(
    problem: &Problem,
    runner: &LsaRunner,
    pool: &ThreadPool,
    cfg: &ExperimentConfig,
    n: usize,
    block_len: usize,
    with_noise: bool,
) -> Result<Vec<Replicate>> {
    let u = &problem.direction;
    pool.install(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(cfg.base_seed, &[n as u64, i]);
                let traj = runner.run(problem.theta0.as_slice(), n, seed, problem.start)?;
                let noise_obm = if with_noise {
                    obm_noise_variance(&problem.instance, &traj.observations, block_len, u)?
                } else {
                    f64::NAN
                };
                Ok(Replicate {
                    delta: pr_error_projection(&traj, &problem.truth, u),
                    center: u.project(traj.pr_average().as_slice()),
                    obm: obm_variance(&traj, block_len, u)?.variance,
                    noise_obm,
                })
            })
            .collect::<lsa_core::Result<Vec<_>>>()
    })
    .map_err(HarnessError::from)
}

/// Kolmogorov distance to N(0, variance). A zero variance compares against
/// the point mass at 0, whose distance is max(#{x < 0}, #{x > 0}) / N.
pub fn distance_to_centered_normal(sorted: &[f64], variance: f64) -> Result<f64> {
    match kolmogorov_distance(sorted, variance.max(0.0).sqrt()) {
        Err(lsa_core::Error::Degenerate(_)) => {
            let below = sorted.iter().filter(|&&x| x < 0.0).count();
            let above = sorted.iter().filter(|&&x| x > 0.0).count();
            Ok(below.max(above) as f64 / sorted.len() as f64)
        }
        other => Ok(other?),
    }
}

/// Writes the provenance header, then one block of rows per grid point.
/// A failure keeps the rows already written and appends an `# INCOMPLETE`
/// trailer before the error is returned.
fn drive<W: Write>(
    out: &mut W,
    cfg: &ExperimentConfig,
    description: &str,
    columns: &str,
    mut rows_for: impl FnMut(usize, usize) -> Result<Vec<String>>,
) -> Result<()> {
    writeln!(out, "# lsa-harness {VERSION} config={}", cfg.hash())?;
    writeln!(out, "# {description}")?;
    writeln!(out, "{columns}")?;
    for (idx, &n) in cfg.n_grid.iter().enumerate() {
        match rows_for(idx, n) {
            Ok(rows) => {
                for row in rows {
                    writeln!(out, "{row}")?;
                }
                out.flush()?;
            }
            Err(e) => {
                writeln!(out, "# INCOMPLETE: {e}")?;
                out.flush()?;
                return Err(e);
            }
        }
    }
    Ok(())
}

fn max_n(cfg: &ExperimentConfig) -> usize {
    *cfg.n_grid.last().expect("validated grid is non-empty")
}

/// Distance of √n uᵀ(θ̄_n − θ⋆) to its Gaussian limit, to the finite-n
/// Gaussian, and to N(0, σ̂²) for each replicate's own OBM variance.
pub fn run_kolmogorov<W: Write>(problem: &Problem, cfg: &ExperimentConfig, out: &mut W) -> Result<()> {
    let pool = thread_pool(cfg.threads)?;
    let runner = problem.runner(max_n(cfg));
    let sigma2 = problem.sigma2();
    let description = "Kolmogorov distance of sqrt(n) u'(theta_bar - theta_star) to N(0, sigma^2) (limit), \
                       N(0, sigma_n^2) (finite n) and N(0, OBM estimate) per replicate (median and quartiles)";
    drive(out, cfg, description, KOLMOGOROV_COLUMNS, |idx, n| {
        let b = block_for(cfg, idx, n)?;
        let reps = simulate(problem, &runner, &pool, cfg, n, b, false)?;
        let mut deltas: Vec<f64> = reps.iter().map(|r| r.delta).collect();
        deltas.sort_by(f64::total_cmp);
        let kd_limit = distance_to_centered_normal(&deltas, sigma2)?;
        let sigma2_n = finite_n_variance(&problem.instance, &problem.truth, &problem.schedule, n, &problem.direction)?;
        let kd_finite = distance_to_centered_normal(&deltas, sigma2_n)?;
        let kd_obm = pool.install(|| {
            reps.par_iter()
                .map(|r| distance_to_centered_normal(&deltas, r.obm))
                .collect::<Result<Vec<_>>>()
        })?;
        let (q25, q50, q75) = quartiles(&kd_obm);
        Ok(vec![format!("{n},{},{b},{kd_limit},{kd_finite},{q50},{q25},{q75}", cfg.replicates)])
    })
}

/// Coverage of the analytic OBM interval and of the oracle interval built
/// from the true σ(u), with binomial standard errors.
pub fn run_coverage<W: Write>(problem: &Problem, cfg: &ExperimentConfig, out: &mut W) -> Result<()> {
    let pool = thread_pool(cfg.threads)?;
    let runner = problem.runner(max_n(cfg));
    let sigma = problem.sigma2().sqrt();
    let target = problem.direction.project(problem.truth.theta_star.as_slice());
    let description = "coverage of u'theta_star by the OBM interval (analytic quantile) and by the oracle interval \
                       using the true sigma(u); stderr = sqrt(p(1-p)/replicates)";
    drive(out, cfg, description, COVERAGE_COLUMNS, |idx, n| {
        let b = block_for(cfg, idx, n)?;
        let reps = simulate(problem, &runner, &pool, cfg, n, b, false)?;
        let mut rows = Vec::with_capacity(cfg.levels.len());
        for &level in &cfg.levels {
            let oracle_half = normal::quantile(0.5 * (1.0 + level)) * sigma / (n as f64).sqrt();
            let mut obm_hits = Vec::with_capacity(reps.len());
            for r in &reps {
                let est = ObmEstimate {
                    variance: r.obm,
                    block_len: b,
                    n,
                    direction: problem.direction.as_vector().clone(),
                };
                obm_hits.push(confidence_interval(r.center, &est, level, CiMethod::Analytic)?.contains(target));
            }
            let obm = coverage_from_hits(obm_hits)?;
            let oracle = coverage_from_hits(reps.iter().map(|r| (r.center - target).abs() <= oracle_half))?;
            rows.push(format!("{n},{b},{level},{},{},{},{}", obm.rate, obm.stderr, oracle.rate, oracle.stderr));
        }
        Ok(rows)
    })
}

/// Error of the OBM variance against σ²(u), and its distance to the OBM
/// estimate computed on the oracle noise sequence along the same path.
pub fn run_variance_decay<W: Write>(problem: &Problem, cfg: &ExperimentConfig, out: &mut W) -> Result<()> {
    let pool = thread_pool(cfg.threads)?;
    let runner = problem.runner(max_n(cfg));
    let sigma2 = problem.sigma2();
    let description = "|OBM variance - sigma^2(u)| (median and quartiles over replicates) and median \
                       |OBM variance - OBM variance of the oracle noise sequence|";
    drive(out, cfg, description, VARIANCE_COLUMNS, |idx, n| {
        let b = block_for(cfg, idx, n)?;
        let reps = simulate(problem, &runner, &pool, cfg, n, b, true)?;
        let errors: Vec<f64> = reps.iter().map(|r| (r.obm - sigma2).abs()).collect();
        let remainders: Vec<f64> = reps.iter().map(|r| (r.obm - r.noise_obm).abs()).collect();
        let (q25, q50, q75) = quartiles(&errors);
        let (_, remainder, _) = quartiles(&remainders);
        Ok(vec![format!("{n},{b},{q50},{q25},{q75},{remainder}")])
    })
}
