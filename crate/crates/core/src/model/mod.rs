//! Executable model semantics.

pub mod dist;
pub mod expr;
pub mod ir;
pub mod rng;
pub mod simulate;
mod validate;

pub use dist::{Dist, DistKind};
pub use ir::{BlockIr, ModelIr, StmtIr, VarInfo};
pub use rng::{RngStream, Seed, SHARED};
pub use simulate::{Inputs, Work};
pub use validate::validate_model;
