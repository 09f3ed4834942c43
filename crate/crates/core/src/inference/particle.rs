//! Bootstrap particle filter.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::exec::Executor;
use super::resample::{resample, Resampler};
use super::Problem;
use crate::error::{Error, Result};
use crate::lang::Role;
use crate::math::{ess, log_sum_exp, normalize_log_weights};
use crate::model::{Seed, Work, SHARED};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfConfig {
    pub nparticles: usize,
    pub resampler: Resampler,
    /// Resample only when ESS < `ess_rel · P`; `None` resamples every step
    /// (except when the weights are already uniform).
    pub ess_rel: Option<f64>,
    /// Keep particle histories so a trajectory can be drawn at the end.
    pub trajectory: bool,
    /// Check states for non-finite values after every step.
    pub check: bool,
}

impl PfConfig {
    pub fn new(nparticles: usize) -> PfConfig {
        PfConfig {
            nparticles,
            resampler: Resampler::default(),
            ess_rel: None,
            trajectory: true,
            check: true,
        }
    }
}

/// One particle's value at one grid time, linked to its ancestor.
#[derive(Debug)]
struct Node {
    x: Vec<f64>,
    parent: Option<Arc<Node>>,
}

impl Drop for Node {
    // Unlink iteratively so that long unique lineages do not recurse.
    fn drop(&mut self) {
        let mut next = self.parent.take();
        while let Some(p) = next {
            match Arc::try_unwrap(p) {
                Ok(mut node) => next = node.parent.take(),
                Err(_) => break,
            }
        }
    }
}

/// A particle ensemble that can be advanced one grid step at a time.
#[derive(Debug, Clone)]
pub struct ParticleRun {
    cfg: PfConfig,
    seed: Seed,
    nx: usize,
    /// Current grid index.
    index: usize,
    /// Particle states, `P × N_x` row-major.
    x: Vec<f64>,
    log_w: Vec<f64>,
    paths: Vec<Arc<Node>>,
    pub loglik: f64,
    /// Number of resampling passes so far.
    pub resamples: usize,
}

impl ParticleRun {
    /// Draws the initial ensemble, or places every particle at `x0`.
    pub fn start<E: Executor>(
        problem: &Problem<'_>,
        theta: &[f64],
        x0: Option<&[f64]>,
        cfg: PfConfig,
        seed: Seed,
        exec: &E,
    ) -> Result<ParticleRun> {
        if cfg.nparticles < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "the particle filter needs at least 2 particles, got {}",
                cfg.nparticles
            )));
        }
        let ir = problem.ir;
        let nx = ir.count(Role::State);
        if nx == 0 {
            return Err(Error::InvalidArgument("model has no state variables".into()));
        }
        let p = cfg.nparticles;
        let mut x = vec![0.0; p * nx];
        let t0 = problem.schedule.start();
        match x0 {
            Some(x0) => {
                for row in x.chunks_mut(nx) {
                    row.copy_from_slice(x0);
                }
            }
            None => {
                exec.map_chunks(&mut x, nx, |first, chunk| {
                    let mut w = Work::new(ir);
                    for (k, row) in chunk.chunks_mut(nx).enumerate() {
                        let mut rng = seed.stream((first + k) as u64, 0);
                        ir.sample_initial(&mut w, theta, problem.inputs, t0, &mut rng, row)?;
                    }
                    Ok(Vec::<()>::new())
                })?;
            }
        }
        let paths = if cfg.trajectory {
            x.chunks(nx)
                .map(|r| Arc::new(Node { x: r.to_vec(), parent: None }))
                .collect()
        } else {
            Vec::new()
        };
        Ok(ParticleRun {
            cfg,
            seed,
            nx,
            index: 0,
            x,
            log_w: vec![0.0; p],
            paths,
            loglik: 0.0,
            resamples: 0,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks(self.nx)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    /// Switches to a fresh family of random streams for the steps still to
    /// come, so that copies of one run evolve independently.
    pub fn reseed(&mut self, seed: Seed) {
        self.seed = seed;
    }

    fn resample_now(&mut self) -> Result<()> {
        let p = self.cfg.nparticles;
        let first = self.log_w[0];
        if self.log_w.iter().all(|&w| w == first) {
            return Ok(());
        }
        if let Some(rel) = self.cfg.ess_rel {
            if ess(&self.log_w) >= rel * p as f64 {
                return Ok(());
            }
        }
        let mut w = vec![0.0; p];
        normalize_log_weights(&self.log_w, &mut w).ok_or(Error::ZeroWeights)?;
        let mut anc = vec![0; p];
        let mut rng = self.seed.stream(SHARED, self.index as u64 + 1);
        resample(&w, self.cfg.resampler, &mut rng, &mut anc)?;
        let nx = self.nx;
        let mut x = vec![0.0; p * nx];
        for (j, &a) in anc.iter().enumerate() {
            x[j * nx..(j + 1) * nx].copy_from_slice(&self.x[a * nx..(a + 1) * nx]);
        }
        self.x = x;
        if self.cfg.trajectory {
            self.paths = anc.iter().map(|&a| self.paths[a].clone()).collect();
        }
        self.log_w.fill(0.0);
        self.resamples += 1;
        Ok(())
    }

    /// Resamples, propagates to the next grid time and weights. Returns the
    /// log-likelihood increment.
    pub fn advance<E: Executor>(&mut self, problem: &Problem<'_>, theta: &[f64], exec: &E) -> Result<f64> {
        let sched = problem.schedule;
        let i = self.index + 1;
        if i > sched.last() {
            return Err(Error::InvalidArgument("particle filter is already at the end of its window".into()));
        }
        self.resample_now()?;
        let (t_prev, t) = (sched.times[i - 1], sched.times[i]);
        let ir = problem.ir;
        let nx = self.nx;
        let obs = sched.obs[i].map(|k| (&problem.obs.values[k][..], &problem.obs.present[k][..]));
        let seed = self.seed;
        let check = self.cfg.check;
        let inc = exec.map_chunks(&mut self.x, nx, |first, chunk| {
            let mut w = Work::new(ir);
            let mut out = Vec::with_capacity(chunk.len() / nx);
            for (k, row) in chunk.chunks_mut(nx).enumerate() {
                let mut rng = seed.stream((first + k) as u64, i as u64);
                ir.step_transition(&mut w, theta, row, problem.inputs, t_prev, t - t_prev, &mut rng, check)?;
                out.push(match obs {
                    Some((y, present)) => {
                        let l = ir.observe_logpdf(&mut w, theta, row, problem.inputs, t, y, present)?;
                        if l.is_nan() { f64::NEG_INFINITY } else { l }
                    }
                    None => 0.0,
                });
            }
            Ok(out)
        })?;
        let before = log_sum_exp(&self.log_w);
        for (lw, d) in self.log_w.iter_mut().zip(&inc) {
            *lw += d;
        }
        let after = log_sum_exp(&self.log_w);
        if after == f64::NEG_INFINITY {
            return Err(Error::DegenerateEnsemble { time: t });
        }
        let step = after - before;
        self.loglik += step;
        if self.cfg.trajectory {
            let paths = core::mem::take(&mut self.paths);
            self.paths = paths
                .into_iter()
                .zip(self.x.chunks(nx))
                .map(|(parent, r)| {
                    Arc::new(Node {
                        x: r.to_vec(),
                        parent: Some(parent),
                    })
                })
                .collect();
        }
        self.index = i;
        Ok(step)
    }

    /// Draws a particle in proportion to its weight and traces its
    /// ancestry back to the start of the window.
    pub fn sample_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        if !self.cfg.trajectory {
            return Err(Error::InvalidArgument("particle histories were not kept".into()));
        }
        let mut w = vec![0.0; self.log_w.len()];
        normalize_log_weights(&self.log_w, &mut w).ok_or(Error::ZeroWeights)?;
        let mut pick = [0usize];
        resample(&w, Resampler::Multinomial, rng, &mut pick)?;
        Ok(self.lineage(pick[0]))
    }

    /// The ancestral line of particle `j`, oldest first.
    pub fn lineage(&self, j: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.index + 1);
        let mut node = Some(&self.paths[j]);
        while let Some(n) = node {
            out.push(n.x.clone());
            node = n.parent.as_ref();
        }
        out.reverse();
        out
    }
}

/// Outcome of a complete filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub loglik: f64,
    /// A state trajectory over every grid time of the window.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

/// Runs the bootstrap filter over the whole schedule.
pub fn particle_filter<E: Executor>(
    problem: &Problem<'_>,
    theta: &[f64],
    x0: Option<&[f64]>,
    cfg: PfConfig,
    seed: Seed,
    exec: &E,
) -> Result<FilterOutcome> {
    let mut run = ParticleRun::start(problem, theta, x0, cfg, seed, exec)?;
    while run.index() < problem.schedule.last() {
        run.advance(problem, theta, exec)?;
    }
    let trajectory = if cfg.trajectory {
        Some(run.sample_trajectory(&mut seed.fork(1).stream(SHARED, 0))?)
    } else {
        None
    };
    Ok(FilterOutcome {
        loglik: run.loglik,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::exec::Sequential;
    use crate::inference::schedule::{Observations, Schedule};
    use crate::model::Inputs;
    use crate::ModelIr;

    fn toy() -> ModelIr {
        crate::load_model(
            "model T { state x\n noise w\n obs y\n sub initial { x ~ gaussian(0, 1) }\n \
             sub transition { w ~ gaussian(0, 0.5)\n x <- 0.9*x + w }\n sub observation { y ~ gaussian(x, 1) } }",
        )
        .unwrap()
    }

    fn obs(times: &[f64], ys: &[f64]) -> Observations {
        Observations {
            times: times.to_vec(),
            values: ys.iter().map(|&y| vec![y]).collect(),
            present: ys.iter().map(|_| vec![true]).collect(),
        }
    }

    #[test]
    fn one_particle_is_rejected() {
        let ir = toy();
        let o = Observations::none();
        let s = Schedule::new(0.0, 1.0, 1, &o).unwrap();
        let p = Problem {
            ir: &ir,
            inputs: &Inputs::none(),
            obs: &o,
            schedule: &s,
        };
        let r = particle_filter(&p, &[], None, PfConfig::new(1), Seed::new(1), &Sequential);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ancestry_spans_the_window() {
        let ir = toy();
        let o = obs(&[1.0, 2.0, 3.0, 4.0], &[0.5, -0.2, 1.0, 0.3]);
        let s = Schedule::new(0.0, 4.0, 8, &o).unwrap();
        let p = Problem {
            ir: &ir,
            inputs: &Inputs::none(),
            obs: &o,
            schedule: &s,
        };
        let mut run = ParticleRun::start(&p, &[], None, PfConfig::new(64), Seed::new(3), &Sequential).unwrap();
        while run.index() < s.last() {
            run.advance(&p, &[], &Sequential).unwrap();
        }
        for j in 0..64 {
            let line = run.lineage(j);
            assert_eq!(line.len(), s.last() + 1);
            assert_eq!(line.last().unwrap()[..], *run.particles().nth(j).unwrap());
        }
        assert!(run.resamples > 0);
        assert!(run.loglik.is_finite());
    }

    #[test]
    fn uninformative_observations_give_exact_likelihood() {
        // the observation density does not depend on x: every weight equals
        // log N(y; 0, 1) and the estimate is exact
        let ir = crate::load_model(
            "model T { state x\n noise w\n obs y\n sub initial { x ~ gaussian(0, 1) }\n \
             sub transition { w ~ gaussian(0, 1)\n x <- x + w }\n sub observation { y ~ gaussian(0, 1) } }",
        )
        .unwrap();
        let o = obs(&[1.0, 2.0], &[0.3, -1.2]);
        let s = Schedule::new(0.0, 2.0, 2, &o).unwrap();
        let p = Problem {
            ir: &ir,
            inputs: &Inputs::none(),
            obs: &o,
            schedule: &s,
        };
        let out = particle_filter(&p, &[], None, PfConfig::new(16), Seed::new(4), &Sequential).unwrap();
        let want = crate::model::dist::normal_logpdf(0.3, 0.0, 1.0) + crate::model::dist::normal_logpdf(-1.2, 0.0, 1.0);
        assert!((out.loglik - want).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_are_reported() {
        let ir = crate::load_model(
            "model T { state x\n obs y\n sub initial { x ~ uniform(0, 1) }\n sub transition { x <- x }\n \
             sub observation { y ~ uniform(x - 0.1, x + 0.1) } }",
        )
        .unwrap();
        let o = obs(&[1.0], &[5.0]);
        let s = Schedule::new(0.0, 1.0, 1, &o).unwrap();
        let p = Problem {
            ir: &ir,
            inputs: &Inputs::none(),
            obs: &o,
            schedule: &s,
        };
        let r = particle_filter(&p, &[], None, PfConfig::new(8), Seed::new(4), &Sequential);
        assert_eq!(r, Err(Error::DegenerateEnsemble { time: 1.0 }));
    }
}
