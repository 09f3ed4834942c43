//! The `sample` command.

use std::path::Path;

use ssm_core::inference::{
    mh_sample, smc_sampler, ChainState, Executor, FilterKind, FilterSpec, ModelTarget, Observations, PfConfig,
    Problem, Schedule, SmcConfig, ThetaPoint,
};
use ssm_core::lang::Role;
use ssm_core::linalg::extract_linear_gaussian;
use ssm_core::model::{Inputs, Seed, Work, SHARED};
use ssm_core::{load_model, ModelIr};

use crate::config::{FilterChoice, RunConfig, SamplerChoice, Target};
use crate::error::{CliError, CliResult, Context};
use crate::exec::Pool;
use crate::output::{read_init, InitRecord, Output, Record};
use crate::series_io::read_timeseries;

// seed families
const INIT: u64 = 0;
const OBS: u64 = 1;
const CHAIN: u64 = 2;

/// Attempts at drawing an initial chain state with a finite likelihood.
const INIT_TRIES: u64 = 100;

/// What a run produced, besides the output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub records: usize,
    /// Accepted MH proposals, or accepted rejuvenation moves for SMC².
    pub accepted: Option<usize>,
    pub log_evidence: Option<f64>,
}

pub fn load_model_file(path: &Path) -> CliResult<ModelIr> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_model(&src).map_err(|e| CliError::format(path, e.to_string()))
}

/// Runs `cfg` and writes its output file.
pub fn run_sample(cfg: &RunConfig) -> CliResult<Summary> {
    let (out, summary) = sample(cfg)?;
    out.write(&cfg.output_file)?;
    Ok(summary)
}

/// Runs `cfg`, returning the output without writing it.
pub fn sample(cfg: &RunConfig) -> CliResult<(Output, Summary)> {
    let ir = load_model_file(&cfg.model_file)?;
    let inputs = match &cfg.input_file {
        Some(p) => {
            let data = read_timeseries(p, &ir, Role::Input)?;
            Inputs::from_series(&ir, &data).context(|| format!("input file {}", p.display()))?
        }
        None => Inputs::none(),
    };
    let pool = Pool::new(cfg.nthreads).map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cfg.nthreads)))?;
    let mut meta = vec![("command".to_string(), "sample".to_string())];
    meta.extend(cfg.echo().into_iter().map(|(k, v)| (k.to_string(), v)));
    let seed = Seed::new(cfg.seed);
    match cfg.target {
        Target::Prior | Target::Joint => forward(cfg, &ir, &inputs, seed, &pool, meta),
        Target::Posterior => posterior(cfg, &ir, &inputs, seed, &pool, meta),
        Target::Prediction => prediction(cfg, &ir, &inputs, seed, &pool, meta),
    }
}

/// Simulates one trajectory over `times` from `x`, optionally with
/// observations, and returns (states, obs) per time.
#[allow(clippy::too_many_arguments)]
fn simulate(
    ir: &ModelIr,
    w: &mut Work,
    inputs: &Inputs,
    theta: &[f64],
    mut x: Vec<f64>,
    times: &[f64],
    seed: Seed,
    j: u64,
    with_obs: bool,
    check: bool,
) -> ssm_core::Result<(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>)> {
    let ny = ir.count(Role::Obs);
    let mut states = Vec::with_capacity(times.len());
    let mut obs = with_obs.then(|| Vec::with_capacity(times.len()));
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let mut rng = seed.stream(j, i as u64);
            ir.step_transition(w, theta, &mut x, inputs, times[i - 1], t - times[i - 1], &mut rng, check)?;
        }
        if let Some(obs) = obs.as_mut() {
            let mut y = vec![0.0; ny];
            ir.simulate_obs(w, theta, &x, inputs, t, &mut seed.fork(OBS).stream(j, i as u64), &mut y)?;
            obs.push(y);
        }
        states.push(x.clone());
    }
    Ok((states, obs))
}

fn forward(
    cfg: &RunConfig,
    ir: &ModelIr,
    inputs: &Inputs,
    seed: Seed,
    pool: &Pool,
    meta: Vec<(String, String)>,
) -> CliResult<(Output, Summary)> {
    let sched = Schedule::new(cfg.start_time, cfg.end_time, cfg.noutputs, &Observations::none())
        .context(|| "time window".into())?;
    let fixed: Option<Vec<InitRecord>> = cfg.init_file.as_deref().map(|p| read_init(p, ir)).transpose()?;
    if fixed.as_ref().is_some_and(|f| f.is_empty()) {
        return Err(CliError::format(cfg.init_file.clone().unwrap_or_default(), "no samples"));
    }
    let joint = cfg.target == Target::Joint;
    let times = &sched.times;
    let mut slots: Vec<Option<Record>> = vec![None; cfg.nsamples];
    pool.map_chunks(&mut slots, 1, |first, chunk| {
        let mut w = Work::new(ir);
        for (k, slot) in chunk.iter_mut().enumerate() {
            let j = first + k;
            let run = |w: &mut Work| -> ssm_core::Result<Record> {
                let mut rng = seed.fork(INIT).stream(j as u64, 0);
                let theta = match &fixed {
                    Some(f) => f[j % f.len()].theta.clone(),
                    None => {
                        let mut th = vec![0.0; ir.count(Role::Param)];
                        ir.sample_parameter(w, &mut rng, &mut th)?;
                        th
                    }
                };
                let mut x = vec![0.0; ir.count(Role::State)];
                ir.sample_initial(w, &theta, inputs, times[0], &mut rng, &mut x)?;
                let (states, obs) = simulate(ir, w, inputs, &theta, x, times, seed, j as u64, joint, !cfg.disable_assert)?;
                Ok(Record {
                    theta,
                    states: Some(states),
                    obs,
                    loglik: None,
                    log_weight: None,
                })
            };
            *slot = Some(run(&mut w).map_err(|e| tag(e, j))?);
        }
        Ok(Vec::<()>::new())
    })
    .map_err(untag("forward simulation"))?;
    let mut out = Output::new(ir, times.clone(), joint, meta);
    for r in slots.into_iter().flatten() {
        out.push(r);
    }
    let summary = Summary {
        records: out.len(),
        accepted: None,
        log_evidence: None,
    };
    Ok((out, summary))
}

// Engine errors raised inside a worker carry the sample id through an
// `InvalidArgument` wrapper so the message can name it.
fn tag(e: ssm_core::Error, j: usize) -> ssm_core::Error {
    ssm_core::Error::InvalidArgument(format!("sample {j}: {e}"))
}

fn untag(what: &'static str) -> impl Fn(ssm_core::Error) -> CliError {
    move |source| CliError::Engine {
        context: what.to_string(),
        source,
    }
}

fn posterior(
    cfg: &RunConfig,
    ir: &ModelIr,
    inputs: &Inputs,
    seed: Seed,
    pool: &Pool,
    meta: Vec<(String, String)>,
) -> CliResult<(Output, Summary)> {
    let obs_path = cfg.obs_file.as_deref().expect("checked by the config");
    let data = read_timeseries(obs_path, ir, Role::Obs)?;
    let obs = Observations::from_series(ir, &data).context(|| format!("obs file {}", obs_path.display()))?;
    let sched = Schedule::new(cfg.start_time, cfg.end_time, cfg.noutputs, &obs).context(|| "time window".into())?;
    let linear = match cfg.filter {
        FilterChoice::Kalman => Some(extract_linear_gaussian(ir).context(|| "--filter kalman".into())?),
        FilterChoice::Bootstrap => None,
    };
    let kind = match cfg.filter {
        FilterChoice::Kalman => FilterKind::Kalman,
        FilterChoice::Bootstrap => FilterKind::Bootstrap(PfConfig {
            nparticles: cfg.nparticles,
            resampler: cfg.resampler,
            ess_rel: cfg.ess_rel,
            trajectory: true,
            check: !cfg.disable_assert,
        }),
    };
    let problem = Problem {
        ir,
        inputs,
        obs: &obs,
        schedule: &sched,
    };
    let spec = FilterSpec {
        problem,
        kind,
        linear: linear.as_ref(),
    };
    let output_times: Vec<f64> = sched.outputs.iter().map(|&i| sched.times[i]).collect();
    let at_outputs = |traj: &Option<Vec<Vec<f64>>>| traj.as_ref().map(|t| sched.outputs.iter().map(|&i| t[i].clone()).collect());
    let mut out = Output::new(ir, output_times, false, meta);

    match cfg.sampler {
        SamplerChoice::Mh => {
            let target = ModelTarget::new(spec, pool);
            let start = initial_state(&target, seed)?;
            let accepted = mh_sample(&target, start, cfg.nsamples, seed.fork(CHAIN), |_, s, _| {
                out.push(Record {
                    theta: s.point.theta.clone(),
                    states: at_outputs(&s.extra.trajectory),
                    obs: None,
                    loglik: Some(s.loglik),
                    log_weight: None,
                });
                Ok(())
            })
            .context(|| "marginal Metropolis-Hastings".into())?;
            let summary = Summary {
                records: out.len(),
                accepted: Some(accepted),
                log_evidence: None,
            };
            Ok((out, summary))
        }
        SamplerChoice::Smc2 => {
            let smc = SmcConfig {
                ntheta: cfg.nsamples,
                resampler: cfg.resampler,
                trajectory: true,
            };
            let res = smc_sampler(&spec, smc, seed.fork(CHAIN), pool).context(|| "SMC sampler".into())?;
            for p in &res.particles {
                out.push(Record {
                    theta: p.point.theta.clone(),
                    states: at_outputs(&p.trajectory),
                    obs: None,
                    loglik: Some(p.loglik),
                    log_weight: Some(p.log_weight),
                });
            }
            let summary = Summary {
                records: out.len(),
                accepted: Some(res.moves_accepted),
                log_evidence: Some(res.log_evidence),
            };
            Ok((out, summary))
        }
    }
}

/// Draws θ (and x0) from the prior until the likelihood is positive; this
/// is where every posterior chain starts.
pub fn initial_state<E: Executor>(
    target: &ModelTarget<'_, E>,
    seed: Seed,
) -> CliResult<ChainState<ThetaPoint, ssm_core::inference::Evaluation>> {
    use ssm_core::inference::MhTarget;
    let init = seed.fork(INIT);
    let mut last = None;
    for k in 0..INIT_TRIES {
        let point = target
            .sample_prior(&mut init.stream(SHARED, k))
            .context(|| "drawing the initial chain state".into())?;
        let log_prior = target.log_prior(&point).context(|| "initial chain state".into())?;
        let (loglik, extra) = match target.evaluate(&point, init.fork(k)) {
            Ok(v) => v,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        if loglik.is_finite() && log_prior.is_finite() {
            return Ok(ChainState {
                point,
                extra,
                loglik,
                log_prior,
            });
        }
    }
    Err(match last {
        Some(source) => CliError::Engine {
            context: format!("no initial chain state with a finite likelihood in {INIT_TRIES} prior draws"),
            source,
        },
        None => CliError::Engine {
            context: "initial chain state".into(),
            source: ssm_core::Error::InvalidArgument(format!(
                "no prior draw with a finite likelihood in {INIT_TRIES} attempts"
            )),
        },
    })
}

fn prediction(
    cfg: &RunConfig,
    ir: &ModelIr,
    inputs: &Inputs,
    seed: Seed,
    pool: &Pool,
    meta: Vec<(String, String)>,
) -> CliResult<(Output, Summary)> {
    let path = cfg.init_file.as_deref().expect("checked by the config");
    let init = read_init(path, ir)?;
    let mut from = None;
    for (k, r) in init.iter().enumerate() {
        let Some((t, _)) = &r.last else {
            return Err(CliError::format(path, format!("sample {k} has no state to continue from")));
        };
        match from {
            None => from = Some(*t),
            Some(t0) if t0 != *t => {
                return Err(CliError::format(path, format!("samples end at different times ({t0} and {t})")));
            }
            _ => {}
        }
    }
    let Some(t_old) = from else {
        return Err(CliError::format(path, "no samples"));
    };
    // observations never enter a prediction
    let sched = Schedule::new(t_old, cfg.end_time, cfg.noutputs, &Observations::none()).context(|| "prediction window".into())?;
    let times = &sched.times;
    let mut slots: Vec<Option<Record>> = vec![None; init.len()];
    pool.map_chunks(&mut slots, 1, |first, chunk| {
        let mut w = Work::new(ir);
        for (k, slot) in chunk.iter_mut().enumerate() {
            let j = first + k;
            let r = &init[j];
            let x = r.last.as_ref().expect("checked above").1.clone();
            let (states, _) = simulate(ir, &mut w, inputs, &r.theta, x, times, seed, j as u64, false, !cfg.disable_assert)
                .map_err(|e| tag(e, j))?;
            *slot = Some(Record {
                theta: r.theta.clone(),
                states: Some(states),
                obs: None,
                loglik: None,
                log_weight: None,
            });
        }
        Ok(Vec::<()>::new())
    })
    .map_err(untag("prediction"))?;
    let mut out = Output::new(ir, times.clone(), false, meta);
    for r in slots.into_iter().flatten() {
        out.push(r);
    }
    let summary = Summary {
        records: out.len(),
        accepted: None,
        log_evidence: None,
    };
    Ok((out, summary))
}
