mod common;

use common::{config, iid_scalar, noiseless, problem, rows};
use lsa_harness::experiments::{run_coverage, run_kolmogorov, run_variance_decay};

#[test]
fn single_replicate_distance_is_one_sample_bound() {
    let cfg = config("[env]\nseed = 25\n[experiment]\nn_grid = [400]\nreplicates = 1\n");
    let p = lsa_harness::Problem::from_config(&cfg).unwrap();
    let mut out = Vec::new();
    run_kolmogorov(&p, &cfg, &mut out).unwrap();
    let row = &rows(&out)[0];
    assert_eq!(row[1], 1.0);
    assert!((0.5..1.0).contains(&row[3]), "kd_limit {}", row[3]);
}

#[test]
fn noiseless_instance_gives_zero_statistics() {
    let cfg = config(
        "[features]\ndirection = \"explicit\"\ndirection_vector = [0.6, 0.8]\n\
         [schedule]\ntheta0 = \"theta_star\"\nc0 = 0.5\n\
         [experiment]\nn_grid = [64, 256]\nreplicates = 20\n[bootstrap]\nblock_rule = \"pow34\"\n",
    );
    let p = problem(noiseless(), &cfg);
    assert_eq!(p.sigma2(), 0.0);
    let mut kd = Vec::new();
    run_kolmogorov(&p, &cfg, &mut kd).unwrap();
    for row in rows(&kd) {
        assert!(row[3..].iter().all(|&v| v == 0.0), "{row:?}");
    }
    let mut var = Vec::new();
    run_variance_decay(&p, &cfg, &mut var).unwrap();
    for row in rows(&var) {
        assert!(row[2..].iter().all(|&v| v == 0.0), "{row:?}");
    }
}

/// For an i.i.d. stream the OBM estimate has relative standard deviation
/// about sqrt(4b / 3n), so the block is kept short enough for a 10% median
/// error and the schedule fast enough that iterates relax within a block.
#[test]
fn iid_variance_estimate_is_accurate() {
    let cfg = config(
        "[features]\ndim = 1\ndirection = \"explicit\"\ndirection_vector = [1.0]\n\
         [schedule]\ngamma = 0.51\nc0 = 16.0\nk0 = 230\n\
         [experiment]\nn_grid = [100000]\nreplicates = 100\n[bootstrap]\nblock_len = 400\n",
    );
    let p = problem(iid_scalar(), &cfg);
    assert!((p.sigma2() - 1.0).abs() < 1e-12);
    let mut out = Vec::new();
    run_variance_decay(&p, &cfg, &mut out).unwrap();
    let row = &rows(&out)[0];
    assert!(row[2] <= 0.1 * p.sigma2(), "median |error| {}", row[2]);
}

/// With b = n^{3/4} the error is dominated by the estimator's own sampling
/// noise: the LSA remainder is a small fraction of it.
#[test]
fn iid_error_under_the_power_rule_is_sampling_noise() {
    let cfg = config(
        "[features]\ndim = 1\ndirection = \"explicit\"\ndirection_vector = [1.0]\n\
         [schedule]\ngamma = 0.51\nc0 = 1.0\nk0 = 0\n\
         [experiment]\nn_grid = [100000]\nreplicates = 100\n[bootstrap]\nblock_rule = \"pow34\"\n",
    );
    let p = problem(iid_scalar(), &cfg);
    let mut out = Vec::new();
    run_variance_decay(&p, &cfg, &mut out).unwrap();
    let row = &rows(&out)[0];
    let sampling_sd = (4.0 * row[1] / 3.0 / row[0]).sqrt();
    assert!(row[2] <= 1.5 * sampling_sd, "median |error| {} vs sd {sampling_sd}", row[2]);
    assert!(row[5] <= 0.5 * row[2], "remainder {} vs error {}", row[5], row[2]);
}

#[test]
fn oracle_interval_at_high_level_covers() {
    let cfg = config(
        "[features]\ndim = 1\ndirection = \"explicit\"\ndirection_vector = [1.0]\n\
         [schedule]\nc0 = 1.0\nk0 = 0\n\
         [experiment]\nn_grid = [50000]\nreplicates = 400\nlevels = [0.999]\n",
    );
    let p = problem(iid_scalar(), &cfg);
    let mut out = Vec::new();
    run_coverage(&p, &cfg, &mut out).unwrap();
    let row = &rows(&out)[0];
    assert_eq!(row[2], 0.999);
    assert!(row[5] >= 0.99, "oracle coverage {}", row[5]);
}

#[test]
fn oracle_coverage_matches_nominal_levels() {
    let cfg = lsa_harness::ExperimentConfig::load(
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/coverage.toml"),
        &["experiment.n_grid=[100000]".into(), "experiment.replicates=2000".into()],
    )
    .unwrap();
    let p = lsa_harness::Problem::from_config(&cfg).unwrap();
    let mut out = Vec::new();
    run_coverage(&p, &cfg, &mut out).unwrap();
    for row in rows(&out) {
        let (level, rate, stderr) = (row[2], row[5], row[6]);
        assert!((rate - level).abs() <= 3.0 * stderr, "level {level}: oracle coverage {rate} ± {stderr}");
    }
}

#[test]
fn csv_headers_record_version_and_hash() {
    let cfg = config("[env]\nseed = 25\n[experiment]\nn_grid = [100]\nreplicates = 3\n");
    let p = lsa_harness::Problem::from_config(&cfg).unwrap();
    let mut out = Vec::new();
    run_coverage(&p, &cfg, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first, format!("# lsa-harness {} config={}", env!("CARGO_PKG_VERSION"), cfg.hash()));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);
}
