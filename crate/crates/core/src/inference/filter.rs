//! A uniform interface over the two filters, and the marginal MH target
//! built on top of it.

use alloc::vec::Vec;

use super::exec::Executor;
use super::kalman::KalmanRun;
use super::mh::MhTarget;
use super::particle::{ParticleRun, PfConfig};
use super::Problem;
use crate::error::{Error, Result};
use crate::lang::{BlockName, Role};
use crate::linalg::{GaussianState, LinearForm};
use crate::model::{RngStream, Seed, Work, SHARED};

/// Which state filter estimates the marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Kalman,
    Bootstrap(PfConfig),
}

/// Everything a filter run needs besides θ.
#[derive(Debug, Clone, Copy)]
pub struct FilterSpec<'a> {
    pub problem: Problem<'a>,
    pub kind: FilterKind,
    /// Required for [`FilterKind::Kalman`].
    pub linear: Option<&'a LinearForm>,
}

/// A filter positioned at some grid index, ready to continue.
#[derive(Debug, Clone)]
pub enum AttachedFilter {
    Kalman(KalmanRun, usize),
    Particle(ParticleRun),
}

impl AttachedFilter {
    pub fn start<E: Executor>(spec: &FilterSpec<'_>, theta: &[f64], x0: Option<&[f64]>, seed: Seed, exec: &E) -> Result<Self> {
        let p = &spec.problem;
        Ok(match spec.kind {
            FilterKind::Kalman => {
                let lf = spec.linear.ok_or_else(|| Error::InvalidArgument("Kalman filter without a linear form".into()))?;
                let init = match x0 {
                    Some(x0) => GaussianState::point(x0),
                    None => lf.initial(theta, p.inputs, p.schedule.start())?,
                };
                AttachedFilter::Kalman(KalmanRun::start(init), 0)
            }
            FilterKind::Bootstrap(cfg) => AttachedFilter::Particle(ParticleRun::start(p, theta, x0, cfg, seed, exec)?),
        })
    }

    pub fn index(&self) -> usize {
        match self {
            AttachedFilter::Kalman(_, i) => *i,
            AttachedFilter::Particle(r) => r.index(),
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            AttachedFilter::Kalman(r, _) => r.loglik,
            AttachedFilter::Particle(r) => r.loglik,
        }
    }

    /// Advances one grid step; returns the log-likelihood increment.
    pub fn advance<E: Executor>(&mut self, spec: &FilterSpec<'_>, theta: &[f64], exec: &E) -> Result<f64> {
        let p = &spec.problem;
        match self {
            AttachedFilter::Kalman(run, i) => {
                let lf = spec.linear.ok_or_else(|| Error::InvalidArgument("Kalman filter without a linear form".into()))?;
                let next = *i + 1;
                let (t0, t1) = (p.schedule.times[next - 1], p.schedule.times[next]);
                let step = lf.transition(theta, p.inputs, t0, t1 - t0)?;
                let inc = match p.schedule.obs[next] {
                    Some(k) => {
                        let model = lf.observation(theta, p.inputs, t1)?;
                        run.advance(&step, Some((&model, &p.obs.values[k], &p.obs.present[k])))?
                    }
                    None => run.advance(&step, None)?,
                };
                *i = next;
                Ok(inc)
            }
            AttachedFilter::Particle(run) => run.advance(p, theta, exec),
        }
    }

    pub fn advance_to<E: Executor>(&mut self, spec: &FilterSpec<'_>, theta: &[f64], index: usize, exec: &E) -> Result<()> {
        while self.index() < index {
            self.advance(spec, theta, exec)?;
        }
        Ok(())
    }

    /// See [`ParticleRun::reseed`]; the Kalman filter has no randomness to
    /// reseed.
    pub fn reseed(&mut self, seed: Seed) {
        if let AttachedFilter::Particle(r) = self {
            r.reseed(seed);
        }
    }

    /// Draws a state trajectory over grid indices `0..=index()`.
    pub fn sample_trajectory(&self, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
        match self {
            AttachedFilter::Kalman(run, _) => run.sample_trajectory(rng),
            AttachedFilter::Particle(run) => run.sample_trajectory(rng),
        }
    }
}

/// A point of the marginal MH chain: parameters, plus the initial state
/// when the model has a `proposal_initial` block.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPoint {
    pub theta: Vec<f64>,
    pub x0: Option<Vec<f64>>,
}

/// What a likelihood evaluation leaves behind.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub filter: AttachedFilter,
    pub trajectory: Option<Vec<Vec<f64>>>,
}

/// The marginal posterior over θ (and x0) targeted by PMMH and by SMC²
/// rejuvenation, with the likelihood of `y` on grid indices `1..=window`.
pub struct ModelTarget<'a, E> {
    pub spec: FilterSpec<'a>,
    pub exec: &'a E,
    pub window: usize,
    pub trajectory: bool,
    /// `true` when the chain also moves the initial state.
    pub with_initial: bool,
    pub has_proposal: bool,
}

impl<'a, E: Executor> ModelTarget<'a, E> {
    pub fn new(spec: FilterSpec<'a>, exec: &'a E) -> ModelTarget<'a, E> {
        let ir = spec.problem.ir;
        ModelTarget {
            spec,
            exec,
            window: spec.problem.schedule.last(),
            trajectory: true,
            with_initial: ir.has_block(BlockName::ProposalInitial),
            has_proposal: ir.has_block(BlockName::ProposalParameter),
        }
    }

    fn t0(&self) -> f64 {
        self.spec.problem.schedule.start()
    }

    /// A draw from the prior.
    pub fn sample_prior(&self, rng: &mut RngStream) -> Result<ThetaPoint> {
        let ir = self.spec.problem.ir;
        let mut w = Work::new(ir);
        let mut theta = alloc::vec![0.0; ir.count(Role::Param)];
        ir.sample_parameter(&mut w, rng, &mut theta)?;
        let x0 = if self.with_initial {
            let mut x = alloc::vec![0.0; ir.count(Role::State)];
            ir.sample_initial(&mut w, &theta, self.spec.problem.inputs, self.t0(), rng, &mut x)?;
            Some(x)
        } else {
            None
        };
        Ok(ThetaPoint { theta, x0 })
    }
}

impl<E: Executor> MhTarget for ModelTarget<'_, E> {
    type Point = ThetaPoint;
    type Extra = Evaluation;

    fn propose(&self, from: &ThetaPoint, rng: &mut RngStream) -> Result<ThetaPoint> {
        let ir = self.spec.problem.ir;
        let mut w = Work::new(ir);
        let mut theta = alloc::vec![0.0; from.theta.len()];
        if self.has_proposal {
            ir.propose_parameter(&mut w, &from.theta, rng, &mut theta)?;
        } else {
            ir.sample_parameter(&mut w, rng, &mut theta)?;
        }
        let x0 = match &from.x0 {
            Some(x) => {
                let mut out = alloc::vec![0.0; x.len()];
                ir.propose_initial(&mut w, &theta, self.spec.problem.inputs, self.t0(), x, rng, &mut out)?;
                Some(out)
            }
            None => None,
        };
        Ok(ThetaPoint { theta, x0 })
    }

    fn log_proposal(&self, to: &ThetaPoint, from: &ThetaPoint) -> Result<f64> {
        let ir = self.spec.problem.ir;
        let mut w = Work::new(ir);
        let mut lq = if self.has_proposal {
            ir.logpdf_proposal_parameter(&mut w, &from.theta, &to.theta)?
        } else {
            ir.logpdf_parameter(&mut w, &to.theta)?
        };
        if let (Some(xf), Some(xt)) = (&from.x0, &to.x0) {
            lq += ir.logpdf_proposal_initial(&mut w, &to.theta, self.spec.problem.inputs, self.t0(), xf, xt)?;
        }
        Ok(lq)
    }

    fn log_prior(&self, p: &ThetaPoint) -> Result<f64> {
        let ir = self.spec.problem.ir;
        let mut w = Work::new(ir);
        let mut lp = ir.logpdf_parameter(&mut w, &p.theta)?;
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        if let Some(x0) = &p.x0 {
            lp += ir.logpdf_initial(&mut w, &p.theta, self.spec.problem.inputs, self.t0(), x0)?;
        }
        Ok(lp)
    }

    fn evaluate(&self, p: &ThetaPoint, seed: Seed) -> Result<(f64, Evaluation)> {
        let mut filter = AttachedFilter::start(&self.spec, &p.theta, p.x0.as_deref(), seed, self.exec)?;
        match filter.advance_to(&self.spec, &p.theta, self.window, self.exec) {
            Ok(()) => {}
            // an estimate of zero: the proposal is rejected
            Err(Error::DegenerateEnsemble { .. }) => return Ok((f64::NEG_INFINITY, Evaluation { filter, trajectory: None })),
            Err(e) => return Err(e),
        }
        let trajectory = if self.trajectory {
            Some(filter.sample_trajectory(&mut seed.fork(1).stream(SHARED, 0))?)
        } else {
            None
        };
        Ok((filter.loglik(), Evaluation { filter, trajectory }))
    }
}
