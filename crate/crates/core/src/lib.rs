//! State-space modelling and inference.
//!
//! The crate parses a small modelling language for state-space models,
//! lowers it to an executable intermediate representation and runs Bayesian
//! state and parameter estimation over it:
//!
//! * [`lang`] - lexer, parser, AST and pretty-printer for `.bi` model files.
//! * [`model`] - validation into [`model::ModelIr`], distributions, seeded
//!   random streams and block simulation (including RK4 ODE transitions).
//! * [`linalg`] - dense Cholesky machinery and the symbolic extraction of
//!   linear-Gaussian systems.
//! * [`inference`] - square-root Kalman filter, bootstrap particle filter,
//!   marginal Metropolis-Hastings (PMMH) and SMC over parameters (SMC²).
//!
//! The crate is `no_std` and only needs `alloc`. Anything touching files,
//! threads or the command line lives in the companion `ssm-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod inference;
pub mod lang;
pub mod linalg;
pub mod math;
pub mod model;
pub mod series;

pub use error::{Error, Result};
pub use lang::{parse_model, pretty_print};
pub use model::{validate_model, ModelIr};
pub use series::TimeSeries;

/// Parses and validates a model in one go.
pub fn load_model(source: &str) -> Result<ModelIr> {
    let ast = parse_model(source)?;
    validate_model(&ast).map_err(Error::from)
}
