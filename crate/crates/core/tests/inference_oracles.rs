use lsa_core::analysis::{ground_truth, sigma_u, LsaInstance};
use lsa_core::inference::obm_noise_variance;
use lsa_core::UnitVector;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three i.i.d. observations with distinct (A, b) pairs.
fn iid_instance() -> LsaInstance {
    let a = vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]),
        DMatrix::from_row_slice(2, 2, &[0.6, -0.1, 0.4, 1.2]),
        DMatrix::from_row_slice(2, 2, &[1.4, 0.0, 0.1, 0.5]),
    ];
    let b = vec![
        DVector::from_vec(vec![1.0, -0.5]),
        DVector::from_vec(vec![-0.3, 0.9]),
        DVector::from_vec(vec![0.2, 0.1]),
    ];
    LsaInstance::iid(DVector::from_vec(vec![0.5, 0.3, 0.2]), a, b).unwrap()
}

#[test]
fn noise_level_obm_recovers_the_asymptotic_variance_for_iid_chains() {
    let inst = iid_instance();
    let gt = ground_truth(&inst).unwrap();
    let u = UnitVector::normalize(DVector::from_vec(vec![1.0, -2.0])).unwrap();
    let target = sigma_u(&gt, &u);
    let n = 100_000;
    // ⌈√n⌉ keeps the 1 - b/n centring bias of the estimator negligible.
    let b = (n as f64).sqrt().ceil() as usize;
    let mut estimates: Vec<f64> = (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path: Vec<u32> = (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    if x < 0.5 { 0 } else if x < 0.8 { 1 } else { 2 }
                })
                .collect();
            obm_noise_variance(&inst, &path, b, &u).unwrap()
        })
        .collect();
    estimates.sort_by(f64::total_cmp);
    let median = 0.5 * (estimates[49] + estimates[50]);
    assert!((median / target - 1.0).abs() <= 0.1, "median {median} vs {target}");
}
