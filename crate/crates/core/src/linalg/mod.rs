//! Dense linear algebra for the square-root Kalman filter, and the symbolic
//! extraction of linear-Gaussian systems from models.

mod cholesky;
mod extract;
mod gaussian;
mod matrix;
pub mod symbolic;

pub use cholesky::{
    cholesky_downdate, cholesky_factorize, cholesky_factorize_tol, log_det, solve_vec, triangular_solve, Side, PSD_TOL,
};
pub use extract::{extract_linear_gaussian, Affine, LinearForm, LinearGaussianSystem, LinearObs, LinearStep};
pub use gaussian::GaussianState;
pub use matrix::Matrix;
