//! SMC over parameters, each θ-particle carrying its own state filter
//! (SMC² when that filter is a particle filter).

use alloc::vec;
use alloc::vec::Vec;

use super::exec::{Executor, Sequential};
use super::filter::{AttachedFilter, Evaluation, FilterSpec, ModelTarget, ThetaPoint};
use super::mh::{mh_step, ChainState, MhTarget};
use super::resample::{resample, Resampler};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, normalize_log_weights};
use crate::model::{Seed, SHARED};

// seed families
const INIT: u64 = 0;
const FILTER: u64 = 1;
const RESAMPLE: u64 = 2;
const MOVE: u64 = 3;
const TRAJECTORY: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcConfig {
    pub ntheta: usize,
    pub resampler: Resampler,
    /// Draw one state trajectory per θ-particle at the end.
    pub trajectory: bool,
}

impl SmcConfig {
    pub fn new(ntheta: usize) -> SmcConfig {
        SmcConfig {
            ntheta,
            resampler: Resampler::default(),
            trajectory: true,
        }
    }
}

/// One member of the final θ-ensemble.
#[derive(Debug, Clone)]
pub struct SmcParticle {
    pub point: ThetaPoint,
    /// Estimated log-likelihood of all observations in the window.
    pub loglik: f64,
    /// Normalized log-weight.
    pub log_weight: f64,
    pub trajectory: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct SmcOutcome {
    pub particles: Vec<SmcParticle>,
    /// Estimated log marginal likelihood of the data.
    pub log_evidence: f64,
    pub resamples: usize,
    pub moves_proposed: usize,
    pub moves_accepted: usize,
}

type Member = ChainState<ThetaPoint, Evaluation>;

/// Runs the θ-ensemble over the whole schedule of `spec`. Inner filters run
/// sequentially; `exec` spreads θ-particles across workers.
pub fn smc_sampler<E: Executor>(spec: &FilterSpec<'_>, cfg: SmcConfig, seed: Seed, exec: &E) -> Result<SmcOutcome> {
    let p = cfg.ntheta;
    if p < 2 {
        return Err(Error::InvalidArgument(alloc::format!("SMC needs at least 2 θ-particles, got {p}")));
    }
    let inner = Sequential;
    let last = spec.problem.schedule.last();
    let mut target = ModelTarget::new(*spec, &inner);
    target.trajectory = false;

    let mut slots: Vec<Option<Member>> = vec![None; p];
    let target_ref = &target;
    exec.map_chunks(&mut slots, 1, |first, chunk| {
        for (k, slot) in chunk.iter_mut().enumerate() {
            let j = (first + k) as u64;
            let point = target_ref.sample_prior(&mut seed.fork(INIT).stream(j, 0))?;
            let log_prior = target_ref.log_prior(&point)?;
            let filter = AttachedFilter::start(spec, &point.theta, point.x0.as_deref(), seed.fork(FILTER).fork(0).fork(j), &inner)?;
            *slot = Some(ChainState {
                point,
                extra: Evaluation { filter, trajectory: None },
                loglik: 0.0,
                log_prior,
            });
        }
        Ok(Vec::<()>::new())
    })?;
    let mut members: Vec<Member> = slots.into_iter().map(|m| m.expect("initialized")).collect();

    let mut log_v = vec![0.0; p];
    let mut log_evidence = 0.0;
    let (mut resamples, mut proposed, mut accepted) = (0, 0, 0);
    for i in 1..=last {
        if log_v.iter().any(|&v| v != log_v[0]) {
            let mut w = vec![0.0; p];
            normalize_log_weights(&log_v, &mut w).ok_or(Error::ZeroWeights)?;
            let mut anc = vec![0; p];
            resample(&w, cfg.resampler, &mut seed.fork(RESAMPLE).stream(SHARED, i as u64), &mut anc)?;
            members = anc.iter().map(|&a| members[a].clone()).collect();
            log_v.fill(0.0);
            resamples += 1;

            // one MH move per θ-particle against the data up to t_{i-1}
            let mut mover = ModelTarget::new(*spec, &inner);
            mover.trajectory = false;
            mover.window = i - 1;
            let mover = &mover;
            let acc = exec.map_chunks(&mut members, 1, |first, chunk| {
                let mut out = Vec::with_capacity(chunk.len());
                for (k, m) in chunk.iter_mut().enumerate() {
                    let j = (first + k) as u64;
                    let (mut next, a) = mh_step(mover, m, seed.fork(MOVE).fork(i as u64).fork(j))?;
                    next.extra.filter.reseed(seed.fork(FILTER).fork(i as u64).fork(j));
                    *m = next;
                    out.push(a);
                }
                Ok(out)
            })?;
            proposed += p;
            accepted += acc.iter().filter(|&&a| a).count();
        }

        let incs = exec.map_chunks(&mut members, 1, |_, chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            for m in chunk.iter_mut() {
                if m.loglik == f64::NEG_INFINITY {
                    out.push(f64::NEG_INFINITY);
                    continue;
                }
                let inc = match m.extra.filter.advance(spec, &m.point.theta, &inner) {
                    Ok(inc) => inc,
                    // this θ explains the data not at all
                    Err(Error::DegenerateEnsemble { .. }) => f64::NEG_INFINITY,
                    Err(e) => return Err(e),
                };
                m.loglik += inc;
                out.push(inc);
            }
            Ok(out)
        })?;
        // the weights are uniform here: either all equal or just resampled
        let step = log_sum_exp(&incs) - crate::math::ln(p as f64);
        if step == f64::NEG_INFINITY {
            return Err(Error::DegenerateEnsemble {
                time: spec.problem.schedule.times[i],
            });
        }
        log_evidence += step;
        log_v = incs;
    }

    let mut w = vec![0.0; p];
    let log_norm = normalize_log_weights(&log_v, &mut w).ok_or(Error::ZeroWeights)?;
    let mut particles: Vec<Option<SmcParticle>> = vec![None; p];
    let members = &members;
    let log_v = &log_v;
    exec.map_chunks(&mut particles, 1, |first, chunk| {
        for (k, slot) in chunk.iter_mut().enumerate() {
            let j = first + k;
            let m = &members[j];
            let trajectory = if cfg.trajectory && m.loglik > f64::NEG_INFINITY {
                Some(m.extra.filter.sample_trajectory(&mut seed.fork(TRAJECTORY).stream(j as u64, 0))?)
            } else {
                None
            };
            *slot = Some(SmcParticle {
                point: m.point.clone(),
                loglik: m.loglik,
                log_weight: log_v[j] - log_norm,
                trajectory,
            });
        }
        Ok(Vec::<()>::new())
    })?;
    Ok(SmcOutcome {
        particles: particles.into_iter().map(|s| s.expect("filled")).collect(),
        log_evidence,
        resamples,
        moves_proposed: proposed,
        moves_accepted: accepted,
    })
}
