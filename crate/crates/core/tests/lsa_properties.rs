use lsa_core::analysis::LsaInstance;
use lsa_core::lsa::{read_trajectory, run_lsa, write_trajectory, ChainStart, LsaTrajectory, StepSchedule};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_scalar_recursion_has_a_product_form(
        a in 0.1..2.0f64, target in -5.0..5.0f64, start in -5.0..5.0f64,
        c0 in 0.01..0.4f64, k0 in 0u64..50, gamma in 0.5..0.99f64, n in 2usize..400,
    ) {
        let inst = LsaInstance::iid(
            DVector::from_vec(vec![0.5, 0.5]),
            vec![DMatrix::from_element(1, 1, a); 2],
            vec![DVector::from_element(1, a * target); 2],
        ).unwrap();
        let sched = StepSchedule::new(c0, k0, gamma).unwrap();
        let traj = run_lsa(&inst, sched, n, Some(&DVector::from_element(1, start)), 3, ChainStart::Stationary).unwrap();
        let mut product = 1.0;
        let mut mean = 0.0;
        for k in 0..n {
            if k > 0 {
                product *= 1.0 - sched.step_size(k as u64) * a;
            }
            let expected = target + product * (start - target);
            prop_assert!((traj.iterate(k)[0] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            mean += expected / n as f64;
        }
        prop_assert!((traj.pr_average()[0] - mean).abs() <= 1e-10);
    }

    #[test]
    fn step_sizes_decrease(c0 in 1e-3..10.0f64, k0 in 0u64..1000, gamma in 0.5..0.99f64) {
        let table = StepSchedule::new(c0, k0, gamma).unwrap().table(200);
        prop_assert!(table.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(table[0] <= c0);
    }

    #[test]
    fn trajectory_files_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40), dim in 1usize..4) {
        let n = values.len() / dim;
        prop_assume!(n >= 1);
        let traj = LsaTrajectory::from_iterates(values[..n * dim].to_vec(), dim).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        prop_assert_eq!(back.iterates(), traj.iterates());
        prop_assert_eq!(back.dim(), dim);
    }
}
