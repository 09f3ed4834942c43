use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{cholesky_factorize, Matrix};
use crate::error::Result;

/// A Gaussian `N(mean, UᵀU)` carried by its upper-triangular square root.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    pub u: Matrix,
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, u: Matrix) -> GaussianState {
        debug_assert_eq!(mean.len(), u.rows());
        GaussianState { mean, u }
    }

    pub fn from_cov(mean: Vec<f64>, cov: &Matrix) -> Result<GaussianState> {
        Ok(GaussianState {
            mean,
            u: cholesky_factorize(cov)?,
        })
    }

    /// A point mass at `x`.
    pub fn point(x: &[f64]) -> GaussianState {
        GaussianState {
            mean: x.to_vec(),
            u: Matrix::zeros(x.len(), x.len()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov(&self) -> Matrix {
        self.u.tmul(&self.u)
    }

    /// Draws `mean + Uᵀz` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.u.tmatvec(&z);
        for (xi, m) in x.iter_mut().zip(&self.mean) {
            *xi += m;
        }
        x
    }
}
