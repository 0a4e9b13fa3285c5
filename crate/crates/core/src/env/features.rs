use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Linear features φ(s), one row per state, each with ‖φ(s)‖ ≤ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    features: DMatrix<f64>,
}

impl FeatureMap {
    pub fn new(features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidDimension("feature matrix is empty".into()));
        }
        for (s, row) in features.row_iter().enumerate() {
            let norm = row.norm();
            if !(norm <= 1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!("feature row {s} has norm {norm}")));
            }
        }
        Ok(Self { features })
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.features.nrows()
    }

    pub fn phi(&self, s: usize) -> DVector<f64> {
        self.features.row(s).transpose()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Σ_φ = Σ_s μ(s) φ(s) φ(s)ᵀ.
    pub fn design_matrix(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        let weighted = DMatrix::from_fn(self.n_states(), self.dim(), |s, j| weights[s] * self.features[(s, j)]);
        self.features.transpose() * weighted
    }
}

/// Rows of an i.i.d. standard Gaussian matrix, each scaled to unit norm.
pub fn random_features(n_states: usize, dim: usize, seed: u64) -> Result<FeatureMap> {
    const MAX_DRAWS: usize = 100;
    if n_states == 0 || dim == 0 {
        return Err(Error::InvalidDimension("feature map needs at least one state and one dimension".into()));
    }
    if n_states < dim {
        log::warn!("{n_states} states cannot span {dim} feature dimensions; the design matrix will be singular");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(n_states, dim);
    for s in 0..n_states {
        let row = (0..MAX_DRAWS)
            .map(|_| DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng)))
            .find(|row: &DVector<f64>| row.norm() >= 1e-8)
            .ok_or(Error::DegenerateFeatures { row: s, attempts: MAX_DRAWS })?;
        let row = &row / row.norm();
        features.set_row(s, &row.transpose());
    }
    FeatureMap::new(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_unit_vectors() {
        for (n, d) in [(6, 2), (64, 3), (3, 5)] {
            let fm = random_features(n, d, 21).unwrap();
            assert_eq!((fm.n_states(), fm.dim()), (n, d));
            for s in 0..n {
                assert!((fm.phi(s).norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(random_features(6, 2, 3).unwrap(), random_features(6, 2, 3).unwrap());
        assert_ne!(random_features(6, 2, 3).unwrap(), random_features(6, 2, 4).unwrap());
    }

    #[test]
    fn rejects_long_rows() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
        assert!(FeatureMap::new(m).is_err());
    }

    #[test]
    fn design_matrix_of_orthonormal_features() {
        let fm = FeatureMap::new(DMatrix::identity(2, 2)).unwrap();
        let mu = DVector::from_vec(vec![0.25, 0.75]);
        let design = fm.design_matrix(&mu);
        assert_eq!(design, DMatrix::from_diagonal(&mu));
    }
}
