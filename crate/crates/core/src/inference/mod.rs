//! Inference algorithms.
//!
//! Filters walk a [`Schedule`]: the start time followed by the union of
//! output and observation times. Everything is seeded through
//! [`crate::model::Seed`], so a run is a pure function of its seed and does
//! not depend on how an [`Executor`] splits the work.

mod exec;
mod filter;
mod kalman;
mod mh;
mod particle;
mod resample;
mod schedule;
mod smc;

pub use exec::{Executor, Sequential};
pub use filter::{AttachedFilter, Evaluation, FilterKind, FilterSpec, ModelTarget, ThetaPoint};
pub use kalman::{correct, kalman_filter, predict, KalmanObs, KalmanOutcome, KalmanRun};
pub use mh::{mh_sample, mh_step, ChainState, MhTarget};
pub use particle::{particle_filter, FilterOutcome, ParticleRun, PfConfig};
pub use resample::{resample, Resampler};
pub use schedule::{output_times, Observations, Schedule};
pub use smc::{smc_sampler, SmcConfig, SmcOutcome, SmcParticle};

use crate::model::{Inputs, ModelIr};

/// A model together with its data and the grid to run over.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub ir: &'a ModelIr,
    pub inputs: &'a Inputs,
    pub obs: &'a Observations,
    pub schedule: &'a Schedule,
}
