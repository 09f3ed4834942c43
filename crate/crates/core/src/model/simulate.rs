//! Executing the blocks of a model: prior draws, proposals, transitions and
//! observation densities.

use alloc::vec;
use alloc::vec::Vec;

use super::dist::Dist;
use super::ir::{BlockIr, ModelIr, StmtIr};
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::lang::{BlockName, Role};
use crate::math;
use crate::series::TimeSeries;

/// Relative tolerance used when comparing times and splitting intervals.
pub const TIME_EPS: f64 = 1e-9;

/// Piecewise-constant input values: the value of an input at `t` is the last
/// one given at or before `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    /// Per input slot (role-relative), present `(time, value)` pairs.
    series: Vec<Vec<(f64, f64)>>,
}

impl Inputs {
    /// Inputs for a model without input variables.
    pub fn none() -> Inputs {
        Inputs::default()
    }

    pub fn from_series(ir: &ModelIr, data: &TimeSeries) -> Result<Inputs> {
        let cols = data.schema(ir, Role::Input)?;
        let mut series = vec![Vec::new(); ir.count(Role::Input)];
        for row in 0..data.len() {
            for (c, &slot) in cols.iter().enumerate() {
                if let Some(v) = data.get(row, c) {
                    series[slot].push((data.time(row), v));
                }
            }
        }
        Ok(Inputs { series })
    }

    /// Writes every input slot's value at `t` into `frame`.
    pub fn fill(&self, ir: &ModelIr, t: f64, frame: &mut [f64]) -> Result<()> {
        let range = ir.range(Role::Input);
        for (i, slot) in range.enumerate() {
            let s = self.series.get(i).map(|v| v.as_slice()).unwrap_or(&[]);
            let k = s.partition_point(|&(ti, _)| ti <= t + TIME_EPS);
            if k == 0 {
                return Err(Error::MissingInput {
                    name: ir.slot_name(slot),
                    time: t,
                });
            }
            frame[slot] = s[k - 1].1;
        }
        Ok(())
    }
}

/// Scratch space for block execution. One per worker.
#[derive(Debug, Clone)]
pub struct Work {
    pub frame: Vec<f64>,
    tmp: Vec<f64>,
    args: Vec<f64>,
    y0: Vec<f64>,
    k: [Vec<f64>; 4],
}

impl Work {
    pub fn new(ir: &ModelIr) -> Work {
        let mut width = 1;
        let mut eqs = 1;
        for b in BlockName::ALL {
            for s in &ir.block(b).stmts {
                match s {
                    StmtIr::Sample { elems, .. } => width = width.max(elems.len()),
                    StmtIr::Assign { elems, .. } => width = width.max(elems.len()),
                    StmtIr::Ode { eqs: e, .. } => eqs = eqs.max(e.len()),
                }
            }
        }
        Work {
            frame: ir.frame(),
            tmp: vec![0.0; width],
            args: Vec::with_capacity(4),
            y0: vec![0.0; eqs],
            k: core::array::from_fn(|_| vec![0.0; eqs]),
        }
    }
}

enum Mode<'a> {
    /// Draw every sampled variable and run assignments, in place.
    Sample(&'a mut RngStream),
    /// Sum log-densities of the values already in the frame. `mask` (over
    /// the target role, role-relative) skips absent elements.
    LogPdf { mask: Option<&'a [bool]> },
    /// Draw into `out` with arguments evaluated on the unchanged frame.
    Propose(&'a mut RngStream, &'a mut [f64]),
    /// Density of the values in `to` with arguments from the frame.
    ProposalLogPdf(&'a [f64]),
}

fn run_block(ir: &ModelIr, block: &BlockIr, w: &mut Work, dt: f64, mut mode: Mode<'_>) -> Result<f64> {
    let mut total = 0.0;
    for stmt in &block.stmts {
        match stmt {
            StmtIr::Sample { var, kind, elems } => {
                let role_start = ir.range(ir.vars[*var].role).start;
                for (i, e) in elems.iter().enumerate() {
                    if let Mode::LogPdf { mask: Some(m) } = &mode {
                        if !m[e.slot - role_start] {
                            continue;
                        }
                    }
                    w.args.clear();
                    for a in &e.args {
                        w.args.push(a.eval(&w.frame));
                    }
                    let d = Dist::new(*kind, &w.args, dt)?;
                    match &mut mode {
                        Mode::Sample(rng) => w.tmp[i] = d.sample(*rng),
                        Mode::Propose(rng, out) => out[e.slot] = d.sample(*rng),
                        Mode::LogPdf { .. } => total += d.logpdf(w.frame[e.slot]),
                        Mode::ProposalLogPdf(to) => total += d.logpdf(to[e.slot]),
                    }
                }
                if let Mode::Sample(_) = mode {
                    for (i, e) in elems.iter().enumerate() {
                        w.frame[e.slot] = w.tmp[i];
                    }
                }
            }
            StmtIr::Assign { elems, .. } => {
                if let Mode::Sample(_) = mode {
                    for (i, e) in elems.iter().enumerate() {
                        w.tmp[i] = e.rhs.eval(&w.frame);
                    }
                    for (i, e) in elems.iter().enumerate() {
                        w.frame[e.slot] = w.tmp[i];
                    }
                }
            }
            StmtIr::Ode { h, eqs } => {
                if let Mode::Sample(_) = mode {
                    rk4(w, eqs, *h, dt);
                }
            }
        }
    }
    Ok(total)
}

/// Integrates the ODE system over `span` with fixed steps of `h`, the last
/// one shortened.
fn rk4(w: &mut Work, eqs: &[super::ir::AssignElem], h: f64, span: f64) {
    let n = eqs.len();
    let steps = (math::ceil(span / h - TIME_EPS) as usize).max(1);
    for s in 0..steps {
        let hs = if s + 1 == steps { span - (steps - 1) as f64 * h } else { h };
        for (i, e) in eqs.iter().enumerate() {
            w.y0[i] = w.frame[e.slot];
        }
        let [k1, k2, k3, k4] = &mut w.k;
        for (i, e) in eqs.iter().enumerate() {
            k1[i] = e.rhs.eval(&w.frame);
        }
        for i in 0..n {
            w.frame[eqs[i].slot] = w.y0[i] + 0.5 * hs * k1[i];
        }
        for (i, e) in eqs.iter().enumerate() {
            k2[i] = e.rhs.eval(&w.frame);
        }
        for i in 0..n {
            w.frame[eqs[i].slot] = w.y0[i] + 0.5 * hs * k2[i];
        }
        for (i, e) in eqs.iter().enumerate() {
            k3[i] = e.rhs.eval(&w.frame);
        }
        for i in 0..n {
            w.frame[eqs[i].slot] = w.y0[i] + hs * k3[i];
        }
        for (i, e) in eqs.iter().enumerate() {
            k4[i] = e.rhs.eval(&w.frame);
        }
        for i in 0..n {
            w.frame[eqs[i].slot] = w.y0[i] + hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn load(ir: &ModelIr, w: &mut Work, role: Role, values: &[f64]) {
    let r = ir.range(role);
    w.frame[r].copy_from_slice(values);
}

fn store(ir: &ModelIr, w: &Work, role: Role, out: &mut [f64]) {
    out.copy_from_slice(&w.frame[ir.range(role)]);
}

fn check_finite(ir: &ModelIr, w: &Work, role: Role, block: &'static str, t: f64) -> Result<()> {
    for s in ir.range(role) {
        if !w.frame[s].is_finite() {
            return Err(Error::NonFinite {
                block,
                variable: ir.slot_name(s),
                time: t,
            });
        }
    }
    Ok(())
}

/// Splits a gap into sub-steps of `delta`, the last one shortened.
pub fn substeps(gap: f64, delta: f64) -> impl Iterator<Item = (f64, f64)> {
    let n = (math::ceil(gap / delta - TIME_EPS) as usize).max(1);
    (0..n).map(move |k| {
        let start = k as f64 * delta;
        let len = if k + 1 == n { gap - start } else { delta };
        (start, len)
    })
}

impl ModelIr {
    /// Draws θ from the `parameter` block.
    pub fn sample_parameter(&self, w: &mut Work, rng: &mut RngStream, theta: &mut [f64]) -> Result<()> {
        w.frame.fill(0.0);
        run_block(self, self.block(BlockName::Parameter), w, 1.0, Mode::Sample(rng))?;
        check_finite(self, w, Role::Param, "parameter", 0.0)?;
        store(self, w, Role::Param, theta);
        Ok(())
    }

    /// Prior log-density of θ; `-inf` outside the support.
    pub fn logpdf_parameter(&self, w: &mut Work, theta: &[f64]) -> Result<f64> {
        load(self, w, Role::Param, theta);
        run_block(self, self.block(BlockName::Parameter), w, 1.0, Mode::LogPdf { mask: None })
    }

    /// Draws the initial state given θ.
    pub fn sample_initial(
        &self,
        w: &mut Work,
        theta: &[f64],
        inputs: &Inputs,
        t0: f64,
        rng: &mut RngStream,
        x: &mut [f64],
    ) -> Result<()> {
        load(self, w, Role::Param, theta);
        inputs.fill(self, t0, &mut w.frame)?;
        w.frame[self.range(Role::State)].fill(0.0);
        run_block(self, self.block(BlockName::Initial), w, 1.0, Mode::Sample(rng))?;
        check_finite(self, w, Role::State, "initial", t0)?;
        store(self, w, Role::State, x);
        Ok(())
    }

    /// Log-density of an initial state under the `initial` block.
    pub fn logpdf_initial(&self, w: &mut Work, theta: &[f64], inputs: &Inputs, t0: f64, x: &[f64]) -> Result<f64> {
        load(self, w, Role::Param, theta);
        load(self, w, Role::State, x);
        inputs.fill(self, t0, &mut w.frame)?;
        run_block(self, self.block(BlockName::Initial), w, 1.0, Mode::LogPdf { mask: None })
    }

    /// Draws θ' ~ q(· | θ) from `proposal_parameter`.
    pub fn propose_parameter(&self, w: &mut Work, theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
        load(self, w, Role::Param, theta);
        let mut next = w.frame.clone();
        run_block(self, self.block(BlockName::ProposalParameter), w, 1.0, Mode::Propose(rng, &mut next))?;
        out.copy_from_slice(&next[self.range(Role::Param)]);
        Ok(())
    }

    /// log q(to | from) under `proposal_parameter`.
    pub fn logpdf_proposal_parameter(&self, w: &mut Work, from: &[f64], to: &[f64]) -> Result<f64> {
        load(self, w, Role::Param, from);
        let mut target = w.frame.clone();
        target[self.range(Role::Param)].copy_from_slice(to);
        run_block(self, self.block(BlockName::ProposalParameter), w, 1.0, Mode::ProposalLogPdf(&target))
    }

    /// Draws x0' ~ q(· | x0) from `proposal_initial`, with parameters `theta`.
    #[allow(clippy::too_many_arguments)]
    pub fn propose_initial(
        &self,
        w: &mut Work,
        theta: &[f64],
        inputs: &Inputs,
        t0: f64,
        x: &[f64],
        rng: &mut RngStream,
        out: &mut [f64],
    ) -> Result<()> {
        load(self, w, Role::Param, theta);
        load(self, w, Role::State, x);
        inputs.fill(self, t0, &mut w.frame)?;
        let mut next = w.frame.clone();
        run_block(self, self.block(BlockName::ProposalInitial), w, 1.0, Mode::Propose(rng, &mut next))?;
        out.copy_from_slice(&next[self.range(Role::State)]);
        Ok(())
    }

    /// log q(to | from) under `proposal_initial`.
    pub fn logpdf_proposal_initial(
        &self,
        w: &mut Work,
        theta: &[f64],
        inputs: &Inputs,
        t0: f64,
        from: &[f64],
        to: &[f64],
    ) -> Result<f64> {
        load(self, w, Role::Param, theta);
        load(self, w, Role::State, from);
        inputs.fill(self, t0, &mut w.frame)?;
        let mut target = w.frame.clone();
        target[self.range(Role::State)].copy_from_slice(to);
        run_block(self, self.block(BlockName::ProposalInitial), w, 1.0, Mode::ProposalLogPdf(&target))
    }

    /// Advances `x` from `t` to `t + dt` in sub-steps of the transition's
    /// `delta`. Noise is redrawn in every sub-step.
    #[allow(clippy::too_many_arguments)]
    pub fn step_transition(
        &self,
        w: &mut Work,
        theta: &[f64],
        x: &mut [f64],
        inputs: &Inputs,
        t: f64,
        dt: f64,
        rng: &mut RngStream,
        check: bool,
    ) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("transition over non-positive span {dt}")));
        }
        load(self, w, Role::Param, theta);
        load(self, w, Role::State, x);
        let block = self.block(BlockName::Transition);
        for (start, len) in substeps(dt, self.delta) {
            inputs.fill(self, t + start, &mut w.frame)?;
            run_block(self, block, w, len, Mode::Sample(rng))?;
            if check {
                check_finite(self, w, Role::State, "transition", t + start + len)?;
            }
        }
        store(self, w, Role::State, x);
        Ok(())
    }

    /// Sum of observation log-densities over the present elements of `y`.
    #[allow(clippy::too_many_arguments)]
    pub fn observe_logpdf(
        &self,
        w: &mut Work,
        theta: &[f64],
        x: &[f64],
        inputs: &Inputs,
        t: f64,
        y: &[f64],
        present: &[bool],
    ) -> Result<f64> {
        if !present.iter().any(|&p| p) {
            return Ok(0.0);
        }
        load(self, w, Role::Param, theta);
        load(self, w, Role::State, x);
        load(self, w, Role::Obs, y);
        inputs.fill(self, t, &mut w.frame)?;
        run_block(self, self.block(BlockName::Observation), w, 1.0, Mode::LogPdf { mask: Some(present) })
    }

    /// Draws observations given the state.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_obs(
        &self,
        w: &mut Work,
        theta: &[f64],
        x: &[f64],
        inputs: &Inputs,
        t: f64,
        rng: &mut RngStream,
        y: &mut [f64],
    ) -> Result<()> {
        load(self, w, Role::Param, theta);
        load(self, w, Role::State, x);
        inputs.fill(self, t, &mut w.frame)?;
        run_block(self, self.block(BlockName::Observation), w, 1.0, Mode::Sample(rng))?;
        store(self, w, Role::Obs, y);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rng::Seed;
    use crate::model::validate_model;
    use crate::parse_model;
    use rand_distr::{Distribution, StandardNormal};
    use std::vec::Vec;

    const WINDKESSEL: &str = include_str!("../../../../models/windkessel/Windkessel.bi");
    const LORENZ96: &str = include_str!("../../../../models/lorenz96/Lorenz96.bi");

    fn load(src: &str) -> ModelIr {
        validate_model(&parse_model(src).unwrap()).unwrap()
    }

    fn const_input(ir: &ModelIr, value: f64) -> Inputs {
        let mut s = TimeSeries::new(ir.slot_names(Role::Input));
        s.push_row(0.0, &[Some(value)]).unwrap();
        Inputs::from_series(ir, &s).unwrap()
    }

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn windkessel_prior_draws() {
        let ir = load(WINDKESSEL);
        let mut w = Work::new(&ir);
        let mut theta = [0.0; 4];
        let mut rs = Vec::new();
        let mut pp = Vec::new();
        let inputs = const_input(&ir, 0.0);
        for i in 0..100_000u64 {
            let mut rng = Seed::new(5).stream(i, 0);
            ir.sample_parameter(&mut w, &mut rng, &mut theta).unwrap();
            assert!(theta.iter().all(|&v| v > 0.0));
            rs.push(theta[0]);
            let mut x = [0.0];
            ir.sample_initial(&mut w, &theta, &inputs, 0.0, &mut rng, &mut x).unwrap();
            pp.push(x[0]);
        }
        let (m, sd) = mean_sd(&rs);
        assert!((m - 1.8).abs() < 3.0 * sd / (1e5f64).sqrt(), "{m}");
        let (m, sd) = mean_sd(&pp);
        assert!((m - 90.0).abs() < 3.0 * sd / (1e5f64).sqrt(), "{m}");
        assert!((sd - 15.0).abs() < 0.2, "{sd}");
    }

    #[test]
    fn lorenz_prior_support() {
        let ir = load(LORENZ96);
        let mut w = Work::new(&ir);
        for i in 0..1000u64 {
            let mut rng = Seed::new(9).stream(i, 0);
            let mut theta = [0.0; 2];
            ir.sample_parameter(&mut w, &mut rng, &mut theta).unwrap();
            assert!((8.0..=12.0).contains(&theta[0]));
            let mut x = [0.0; 8];
            ir.sample_initial(&mut w, &theta, &Inputs::none(), 0.0, &mut rng, &mut x).unwrap();
            assert!(x.iter().all(|v| (-1.0..=3.0).contains(v)));
        }
    }

    #[test]
    fn degenerate_initial() {
        let ir = load("model M { state x\n sub initial { x <- 0 }\n sub transition { x <- x } }");
        let mut w = Work::new(&ir);
        let mut x = [7.0];
        ir.sample_initial(&mut w, &[], &Inputs::none(), 0.0, &mut Seed::new(1).stream(0, 0), &mut x).unwrap();
        assert_eq!(x, [0.0]);
    }

    #[test]
    fn lorenz_fixed_point_is_preserved() {
        let ir = load(LORENZ96);
        let mut w = Work::new(&ir);
        let f = 9.5;
        let mut x = [f; 8];
        let mut rng = Seed::new(1).stream(0, 0);
        ir.step_transition(&mut w, &[f, 0.0], &mut x, &Inputs::none(), 0.0, 0.37, &mut rng, true).unwrap();
        assert!(x.iter().all(|&v| (v - f).abs() < 1e-12), "{x:?}");
    }

    #[test]
    fn windkessel_decays_without_inflow() {
        let ir = load(WINDKESSEL.replace("h*sqrt(sigma2)", "h*sqrt(sigma2)*0.0 + 1e-300").as_str());
        let mut w = Work::new(&ir);
        let (r, c) = (1.2, 1.7);
        let theta = [r, c, 0.05, 4.0];
        let mut x = [100.0];
        let mut rng = Seed::new(1).stream(0, 0);
        ir.step_transition(&mut w, &theta, &mut x, &const_input(&ir, 0.0), 0.0, 0.04, &mut rng, true).unwrap();
        let expect = (-0.04f64 / (r * c)).exp() * 100.0;
        assert!((x[0] - expect).abs() < 1e-10, "{} vs {expect}", x[0]);
    }

    #[test]
    fn noise_is_drawn_once_per_substep() {
        let ir = load("model M { const h = 0.1\n noise w\n state x\n sub initial { x <- 0 }\n \
                       sub transition(delta = h) { w ~ gaussian(0.0, 1.0)\n x <- x + w } }");
        let mut w = Work::new(&ir);
        let mut x = [0.0];
        ir.step_transition(&mut w, &[], &mut x, &Inputs::none(), 0.0, 0.2, &mut Seed::new(3).stream(1, 2), true)
            .unwrap();
        let mut rng = Seed::new(3).stream(1, 2);
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(x[0], a + b);
        // a partial final sub-step still draws
        let mut x = [0.0];
        ir.step_transition(&mut w, &[], &mut x, &Inputs::none(), 0.0, 0.25, &mut Seed::new(3).stream(1, 2), true)
            .unwrap();
        let c: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(x[0], a + b + c);
    }

    #[test]
    fn wiener_increment_scales_with_substep() {
        let ir = load("model M { noise w\n state x\n sub initial { x <- 0 }\n \
                       sub transition(delta = 0.25) { w ~ wiener()\n x <- x + w } }");
        let mut w = Work::new(&ir);
        let n = 20_000;
        let mut xs = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let mut x = [0.0];
            ir.step_transition(&mut w, &[], &mut x, &Inputs::none(), 0.0, 0.6, &mut Seed::new(4).stream(i, 0), true)
                .unwrap();
            xs.push(x[0]);
        }
        // 0.25 + 0.25 + 0.1: variance adds up to the elapsed time
        let (_, sd) = mean_sd(&xs);
        assert!((sd * sd - 0.6).abs() < 0.03, "{}", sd * sd);
    }

    #[test]
    fn observation_densities() {
        let ir = load(WINDKESSEL);
        let mut w = Work::new(&ir);
        let theta = [1.0, 1.0, 0.05, 1.0];
        let inputs = const_input(&ir, 200.0);
        let pp = 80.0;
        let y = [pp + 0.05 * 200.0];
        let l = ir.observe_logpdf(&mut w, &theta, &[pp], &inputs, 0.3, &y, &[true]).unwrap();
        let expect = -(2.0 * (2.0 * core::f64::consts::PI).sqrt()).ln();
        assert!((l - expect).abs() < 1e-12);
        assert_eq!(ir.observe_logpdf(&mut w, &theta, &[pp], &inputs, 0.3, &y, &[false]).unwrap(), 0.0);

        let ir = load(LORENZ96);
        let mut w = Work::new(&ir);
        let x = [1.0; 8];
        let mut y = [0.0; 8];
        y[2] = 2.0;
        let mut mask = [false; 8];
        mask[2] = true;
        let l = ir.observe_logpdf(&mut w, &[10.0, 0.1], &x, &Inputs::none(), 0.0, &y, &mask).unwrap();
        let expect = -0.5 * (1.0f64 / 0.5).powi(2) - ((2.0 * core::f64::consts::PI).sqrt() * 0.5).ln();
        assert!((l - expect).abs() < 1e-12);
    }

    #[test]
    fn simulated_obs_have_the_declared_spread() {
        let ir = load(LORENZ96);
        let mut w = Work::new(&ir);
        let x = [1.0; 8];
        let mut draws = Vec::new();
        for i in 0..100_000u64 {
            let mut y = [0.0; 8];
            ir.simulate_obs(&mut w, &[10.0, 0.1], &x, &Inputs::none(), 0.0, &mut Seed::new(6).stream(i, 0), &mut y)
                .unwrap();
            draws.push(y[5]);
        }
        let (m, sd) = mean_sd(&draws);
        assert!((m - 1.0).abs() < 3.0 * 0.5 / (1e5f64).sqrt());
        // sd of the sample sd is about sd / sqrt(2n)
        assert!((sd - 0.5).abs() < 4.0 * 0.5 / (2e5f64).sqrt(), "{sd}");
        // sd-0 limit is rejected
        let ir = load("model M { state x\n obs y\n sub initial { x <- 0 }\n sub transition { x <- x }\n \
                       sub observation { y ~ gaussian(x, 0.0) } }");
        let mut w = Work::new(&ir);
        let err = ir.simulate_obs(&mut w, &[], &[0.0], &Inputs::none(), 0.0, &mut Seed::new(1).stream(0, 0), &mut [0.0]);
        assert!(matches!(err, Err(Error::InvalidDistribution { .. })));
    }

    #[test]
    fn non_finite_state_is_an_error() {
        let ir = load("model M { state x\n sub initial { x <- 1 }\n sub transition(delta = 1) { x <- x * 1e300 } }");
        let mut w = Work::new(&ir);
        let mut x = [1.0];
        let err = ir.step_transition(&mut w, &[], &mut x, &Inputs::none(), 0.0, 3.0, &mut Seed::new(1).stream(0, 0), true);
        assert!(matches!(err, Err(Error::NonFinite { block: "transition", .. })), "{err:?}");
    }

    #[test]
    fn inputs_are_piecewise_constant_and_required() {
        let ir = load(WINDKESSEL);
        let mut s = TimeSeries::new(ir.slot_names(Role::Input));
        s.push_row(0.0, &[Some(1.0)]).unwrap();
        s.push_row(0.01, &[Some(2.0)]).unwrap();
        s.push_row(0.02, &[None]).unwrap();
        let inputs = Inputs::from_series(&ir, &s).unwrap();
        let mut f = ir.frame();
        let slot = ir.range(Role::Input).start;
        inputs.fill(&ir, 0.005, &mut f).unwrap();
        assert_eq!(f[slot], 1.0);
        inputs.fill(&ir, 0.01, &mut f).unwrap();
        assert_eq!(f[slot], 2.0);
        inputs.fill(&ir, 0.5, &mut f).unwrap();
        assert_eq!(f[slot], 2.0);
        assert!(matches!(inputs.fill(&ir, -0.1, &mut f), Err(Error::MissingInput { .. })));
        assert!(matches!(Inputs::none().fill(&ir, 0.0, &mut f), Err(Error::MissingInput { .. })));
    }

    #[test]
    fn proposals_round_trip_their_densities() {
        let ir = load(LORENZ96);
        let mut w = Work::new(&ir);
        let theta = [10.0, 0.3];
        let mut next = [0.0; 2];
        ir.propose_parameter(&mut w, &theta, &mut Seed::new(1).stream(0, 0), &mut next).unwrap();
        assert!((8.0..=12.0).contains(&next[0]) && next[1] > 0.0);
        let q = ir.logpdf_proposal_parameter(&mut w, &theta, &next).unwrap();
        // q factorises: truncated gaussian for F, inverse gamma for sigma2
        let f = Dist::TruncatedGaussian {
            mean: 10.0,
            sd: 0.1,
            lower: 8.0,
            upper: 12.0,
        };
        let s = Dist::InverseGamma { shape: 2.0, scale: 0.9 };
        assert!((q - f.logpdf(next[0]) - s.logpdf(next[1])).abs() < 1e-12);
        let x = [0.0; 8];
        let mut x1 = [0.0; 8];
        ir.propose_initial(&mut w, &theta, &Inputs::none(), 0.0, &x, &mut Seed::new(1).stream(0, 1), &mut x1).unwrap();
        assert!(x1.iter().all(|v| (-1.0..=3.0).contains(v)));
        assert!(ir.logpdf_proposal_initial(&mut w, &theta, &Inputs::none(), 0.0, &x, &x1).unwrap().is_finite());
        assert_eq!(ir.logpdf_initial(&mut w, &theta, &Inputs::none(), 0.0, &x1).unwrap(), 8.0 * -(4.0f64).ln());
        assert_eq!(ir.logpdf_parameter(&mut w, &[13.0, 0.3]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn substep_split() {
        let s: Vec<(f64, f64)> = substeps(0.04, 0.01).collect();
        assert_eq!(s.len(), 4);
        let s: Vec<(f64, f64)> = substeps(0.25, 0.1).collect();
        assert_eq!(s.len(), 3);
        assert!((s[2].1 - 0.05).abs() < 1e-12);
    }
}
