#![allow(dead_code)]

use lsa_core::analysis::LsaInstance;
use lsa_harness::{ExperimentConfig, Problem};
use nalgebra::{DMatrix, DVector};

/// Scalar i.i.d. instance with A(z) = 1 and b(z) = ±1, so σ²(u) = 1.
pub fn iid_scalar() -> LsaInstance {
    LsaInstance::iid(
        DVector::from_vec(vec![0.5, 0.5]),
        vec![DMatrix::from_element(1, 1, 1.0); 2],
        vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
    )
    .unwrap()
}

/// A(z) = I and b(z) = (1/2, 1) for every z: the noise vanishes identically.
pub fn noiseless() -> LsaInstance {
    LsaInstance::iid(
        DVector::from_vec(vec![0.5, 0.5]),
        vec![DMatrix::identity(2, 2); 2],
        vec![DVector::from_vec(vec![0.5, 1.0]); 2],
    )
    .unwrap()
}

pub fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text, &[]).unwrap()
}

pub fn problem(inst: LsaInstance, cfg: &ExperimentConfig) -> Problem {
    Problem::from_instance(inst, cfg).unwrap()
}

/// Data rows of a harness CSV, split into fields.
pub fn rows(csv: &[u8]) -> Vec<Vec<f64>> {
    String::from_utf8(csv.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}
