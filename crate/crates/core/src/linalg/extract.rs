//! Recovering the matrix form of a linear-Gaussian model from its IR.
//!
//! Every right-hand side in the `initial`, `transition` and `observation`
//! blocks is differentiated symbolically with respect to the random slots
//! (states and noise). The model is linear-Gaussian when all second
//! derivatives fold to a structural zero and every draw is Gaussian with a
//! standard deviation that does not depend on random slots. The first
//! derivatives and the zero-substituted offsets are kept as compiled
//! expressions, so the matrices can be re-evaluated for any θ and inputs.
//!
//! Numerically each interval is propagated as an affine map over the basis
//! `[1, x(t), z_1 … z_K]`, where the `z_k` are the standard-normal draws made
//! inside the interval. Sub-steps and RK4 stages are applied to those affine
//! rows exactly as the simulator applies them to values, so the resulting
//! `F`, `b`, `Q` describe the same discretization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::symbolic::{diff, simplify, zero_slots};
use super::{cholesky_factorize, GaussianState, Matrix};
use crate::error::{Error, Result};
use crate::lang::{BlockName, Role};
use crate::model::expr::{Compiled, RExpr};
use crate::model::simulate::{substeps, TIME_EPS};
use crate::model::{DistKind, Inputs, ModelIr, StmtIr};
use crate::math;

/// An expression `offset + Σ coeff·slot`, affine in the random slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub offset: Compiled,
    pub coeffs: Vec<(usize, Compiled)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Sd {
    Expr(Compiled),
    /// `sqrt` of the elapsed sub-step.
    Wiener,
}

#[derive(Debug, Clone, PartialEq)]
enum LinStmt {
    Draw(Vec<(usize, Affine, Sd)>),
    Assign(Vec<(usize, Affine)>),
    Ode { h: f64, eqs: Vec<(usize, Affine)> },
}

/// One transition interval `x' = F x + b + ε`, `ε ~ N(0, q_sqrtᵀ q_sqrt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStep {
    pub f: Matrix,
    pub b: Vec<f64>,
    pub q_sqrt: Matrix,
}

/// Observation `y = H x + c + η`, `η ~ N(0, diag(r_sd²))`. `H` has one row
/// per observation element.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObs {
    pub h: Matrix,
    pub c: Vec<f64>,
    pub r_sd: Vec<f64>,
}

/// A linear-Gaussian system evaluated on a time grid: `steps[i]` maps
/// `times[i]` to `times[i + 1]`, `obs[i]` applies at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSystem {
    pub times: Vec<f64>,
    pub initial: GaussianState,
    pub steps: Vec<LinearStep>,
    pub obs: Vec<LinearObs>,
}

/// The symbolic matrix form of a model, ready for numeric evaluation.
#[derive(Debug, Clone)]
pub struct LinearForm {
    ir: ModelIr,
    initial: Vec<LinStmt>,
    transition: Vec<LinStmt>,
    observation: Vec<(usize, Affine, Compiled)>,
}

fn nonlinear(block: &'static str, ir: &ModelIr, slot: usize, reason: String) -> Error {
    Error::NonlinearModel {
        block,
        variable: ir.slot_name(slot),
        reason,
    }
}

/// Extracts the matrix form, or fails with [`Error::NonlinearModel`].
pub fn extract_linear_gaussian(ir: &ModelIr) -> Result<LinearForm> {
    let random = ir.range(Role::Noise).start..ir.range(Role::State).end;
    let transition = lower_block(ir, BlockName::Transition, "transition", &random)?;
    let mut observation = Vec::new();
    for stmt in &ir.block(BlockName::Observation).stmts {
        let lowered = lower_stmt(ir, stmt, "observation", &random)?;
        match lowered {
            LinStmt::Draw(elems) => {
                for (slot, mean, sd) in elems {
                    match sd {
                        Sd::Expr(sd) => observation.push((slot - ir.range(Role::Obs).start, mean, sd)),
                        Sd::Wiener => {
                            return Err(nonlinear("observation", ir, slot, "wiener observations".into()));
                        }
                    }
                }
            }
            _ => return Err(Error::Unsupported("assignments in the observation block".into())),
        }
    }
    let initial = lower_block(ir, BlockName::Initial, "initial", &random)?;
    Ok(LinearForm {
        ir: ir.clone(),
        initial,
        transition,
        observation,
    })
}

fn lower_block(ir: &ModelIr, name: BlockName, block: &'static str, random: &Range<usize>) -> Result<Vec<LinStmt>> {
    ir.block(name).stmts.iter().map(|s| lower_stmt(ir, s, block, random)).collect()
}

fn lower_stmt(ir: &ModelIr, stmt: &StmtIr, block: &'static str, random: &Range<usize>) -> Result<LinStmt> {
    Ok(match stmt {
        StmtIr::Sample { kind, elems, .. } => {
            let mut out = Vec::with_capacity(elems.len());
            for e in elems {
                let (mean, sd) = match kind {
                    DistKind::Gaussian => {
                        let sd = &e.args[1].expr;
                        if let Some(s) = first_random(sd, random) {
                            return Err(nonlinear(
                                block,
                                ir,
                                e.slot,
                                format!("standard deviation depends on {}", ir.slot_name(s)),
                            ));
                        }
                        (affine(ir, &e.args[0].expr, block, e.slot, random)?, Sd::Expr(e.args[1].clone()))
                    }
                    DistKind::Wiener => (affine(ir, &RExpr::Const(0.0), block, e.slot, random)?, Sd::Wiener),
                    other => {
                        return Err(nonlinear(block, ir, e.slot, format!("{} distribution is not Gaussian", other.name())));
                    }
                };
                out.push((e.slot, mean, sd));
            }
            LinStmt::Draw(out)
        }
        StmtIr::Assign { elems, .. } => LinStmt::Assign(
            elems
                .iter()
                .map(|e| Ok((e.slot, affine(ir, &e.rhs.expr, block, e.slot, random)?)))
                .collect::<Result<_>>()?,
        ),
        StmtIr::Ode { h, eqs } => LinStmt::Ode {
            h: *h,
            eqs: eqs
                .iter()
                .map(|e| Ok((e.slot, affine(ir, &e.rhs.expr, block, e.slot, random)?)))
                .collect::<Result<_>>()?,
        },
    })
}

fn first_random(e: &RExpr, random: &Range<usize>) -> Option<usize> {
    let mut hit = None;
    e.visit_slots(&mut |s| {
        if hit.is_none() && random.contains(&s) {
            hit = Some(s);
        }
    });
    hit
}

/// Splits `e` into an offset and first derivatives, after checking that all
/// second derivatives with respect to random slots vanish.
fn affine(ir: &ModelIr, e: &RExpr, block: &'static str, target: usize, random: &Range<usize>) -> Result<Affine> {
    let mut slots = Vec::new();
    e.visit_slots(&mut |s| {
        if random.contains(&s) && !slots.contains(&s) {
            slots.push(s);
        }
    });
    slots.sort_unstable();
    let is_random = |s: usize| random.contains(&s);
    let mut coeffs = Vec::with_capacity(slots.len());
    for &s in &slots {
        let d = diff(e, s).map_err(|r| nonlinear(block, ir, target, r))?;
        for &s2 in &slots {
            let d2 = diff(&d, s2).map_err(|r| nonlinear(block, ir, target, r))?;
            if d2.as_const() != Some(0.0) {
                return Err(nonlinear(
                    block,
                    ir,
                    target,
                    format!(
                        "second derivative with respect to {} and {} is not zero",
                        ir.slot_name(s),
                        ir.slot_name(s2)
                    ),
                ));
            }
        }
        let d = simplify(&zero_slots(&d, &is_random));
        if d.as_const() != Some(0.0) {
            coeffs.push((s, Compiled::new(d)));
        }
    }
    let offset = simplify(&zero_slots(e, &is_random));
    Ok(Affine {
        offset: Compiled::new(offset),
        coeffs,
    })
}

/// Affine rows over `[1, x(t) (n), z_1 …]` for every random slot.
struct Propagation {
    random_start: usize,
    n: usize,
    width: usize,
    rows: Vec<Vec<f64>>,
}

impl Propagation {
    fn new(ir: &ModelIr, from_state: bool) -> Propagation {
        let random_start = ir.range(Role::Noise).start;
        let n = ir.count(Role::State);
        let width = 1 + n;
        let count = ir.count(Role::Noise) + n;
        let mut rows = vec![vec![0.0; width]; count];
        if from_state {
            let off = ir.range(Role::State).start - random_start;
            for j in 0..n {
                rows[off + j][1 + j] = 1.0;
            }
        }
        Propagation {
            random_start,
            n,
            width,
            rows,
        }
    }

    fn new_draw(&mut self) -> usize {
        for r in &mut self.rows {
            r.push(0.0);
        }
        self.width += 1;
        self.width - 1
    }

    fn row(&self, slot: usize) -> &[f64] {
        &self.rows[slot - self.random_start]
    }

    /// Numeric coefficients of an affine expression on the current frame.
    fn coefficients(a: &Affine, frame: &[f64]) -> (f64, Vec<(usize, f64)>) {
        (
            a.offset.eval(frame),
            a.coeffs.iter().map(|(s, c)| (*s, c.eval(frame))).collect(),
        )
    }

    fn combine(&self, (offset, coeffs): &(f64, Vec<(usize, f64)>), out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.width, 0.0);
        out[0] = *offset;
        for (s, c) in coeffs {
            for (o, r) in out.iter_mut().zip(self.row(*s)) {
                *o += c * r;
            }
        }
    }

    fn run(&mut self, ir: &ModelIr, stmts: &[LinStmt], frame: &[f64], span: f64) -> Result<()> {
        for stmt in stmts {
            match stmt {
                LinStmt::Draw(elems) => {
                    let mut next = Vec::with_capacity(elems.len());
                    for (slot, mean, sd) in elems {
                        let sd = match sd {
                            Sd::Expr(c) => c.eval(frame),
                            Sd::Wiener => math::sqrt(span),
                        };
                        if !(sd > 0.0 && sd.is_finite()) {
                            return Err(Error::InvalidDistribution {
                                dist: "gaussian",
                                reason: format!("sd = {sd} must be positive (at {})", ir.slot_name(*slot)),
                            });
                        }
                        let coef = Self::coefficients(mean, frame);
                        let mut row = Vec::new();
                        self.combine(&coef, &mut row);
                        next.push((*slot, row, sd));
                    }
                    for (slot, mut row, sd) in next {
                        let col = self.new_draw();
                        row.resize(self.width, 0.0);
                        row[col] = sd;
                        self.rows[slot - self.random_start] = row;
                    }
                }
                LinStmt::Assign(elems) => {
                    let next: Vec<(usize, Vec<f64>)> = elems
                        .iter()
                        .map(|(slot, a)| {
                            let mut row = Vec::new();
                            self.combine(&Self::coefficients(a, frame), &mut row);
                            (*slot, row)
                        })
                        .collect();
                    for (slot, row) in next {
                        self.rows[slot - self.random_start] = row;
                    }
                }
                LinStmt::Ode { h, eqs } => self.rk4(eqs, frame, *h, span),
            }
        }
        Ok(())
    }

    /// RK4 on the affine rows; mirrors the value-level integrator.
    fn rk4(&mut self, eqs: &[(usize, Affine)], frame: &[f64], h: f64, span: f64) {
        let coefs: Vec<(f64, Vec<(usize, f64)>)> = eqs.iter().map(|(_, a)| Self::coefficients(a, frame)).collect();
        let steps = (math::ceil(span / h - TIME_EPS) as usize).max(1);
        let w = self.width;
        let mut k: [Vec<Vec<f64>>; 4] = core::array::from_fn(|_| vec![vec![0.0; w]; eqs.len()]);
        for step in 0..steps {
            let hs = if step + 1 == steps { span - (steps - 1) as f64 * h } else { h };
            let y0: Vec<Vec<f64>> = eqs.iter().map(|(s, _)| self.row(*s).to_vec()).collect();
            for stage in 0..4 {
                for (i, c) in coefs.iter().enumerate() {
                    self.combine(c, &mut k[stage][i]);
                }
                let scale = match stage {
                    0 | 1 => 0.5 * hs,
                    2 => hs,
                    _ => break,
                };
                for (i, (s, _)) in eqs.iter().enumerate() {
                    let row = &mut self.rows[s - self.random_start];
                    for j in 0..w {
                        row[j] = y0[i][j] + scale * k[stage][i][j];
                    }
                }
            }
            for (i, (s, _)) in eqs.iter().enumerate() {
                let row = &mut self.rows[s - self.random_start];
                for j in 0..w {
                    row[j] = y0[i][j] + hs / 6.0 * (k[0][i][j] + 2.0 * k[1][i][j] + 2.0 * k[2][i][j] + k[3][i][j]);
                }
            }
        }
    }

    /// Mean offsets, state coefficients and noise loadings of the states.
    fn state_parts(&self, ir: &ModelIr) -> (Vec<f64>, Matrix, Matrix) {
        let n = self.n;
        let k = self.width - 1 - n;
        let mut b = vec![0.0; n];
        let mut f = Matrix::zeros(n, n);
        let mut l = Matrix::zeros(n, k);
        for (i, s) in ir.range(Role::State).enumerate() {
            let row = self.row(s);
            b[i] = row[0];
            for j in 0..n {
                f[(i, j)] = row[1 + j];
            }
            for j in 0..k {
                l[(i, j)] = row[1 + n + j];
            }
        }
        (b, f, l)
    }
}

/// Square root of `L Lᵀ`.
fn sqrt_of_loadings(l: &Matrix) -> Result<Matrix> {
    cholesky_factorize(&l.mul(&l.transpose()))
}

impl LinearForm {
    pub fn ir(&self) -> &ModelIr {
        &self.ir
    }

    fn frame(&self, theta: &[f64]) -> Vec<f64> {
        let mut frame = self.ir.frame();
        frame[self.ir.range(Role::Param)].copy_from_slice(theta);
        frame
    }

    /// The initial state distribution for parameters `theta`.
    pub fn initial(&self, theta: &[f64], inputs: &Inputs, t0: f64) -> Result<GaussianState> {
        let mut frame = self.frame(theta);
        inputs.fill(&self.ir, t0, &mut frame)?;
        let mut p = Propagation::new(&self.ir, false);
        p.run(&self.ir, &self.initial, &frame, 1.0)?;
        let (mean, _, l) = p.state_parts(&self.ir);
        Ok(GaussianState::new(mean, sqrt_of_loadings(&l)?))
    }

    /// The transition from `t` to `t + dt`, composed over sub-steps.
    pub fn transition(&self, theta: &[f64], inputs: &Inputs, t: f64, dt: f64) -> Result<LinearStep> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("transition over non-positive span {dt}")));
        }
        let mut frame = self.frame(theta);
        let mut p = Propagation::new(&self.ir, true);
        for (start, len) in substeps(dt, self.ir.delta) {
            inputs.fill(&self.ir, t + start, &mut frame)?;
            p.run(&self.ir, &self.transition, &frame, len)?;
        }
        let (b, f, l) = p.state_parts(&self.ir);
        Ok(LinearStep {
            f,
            b,
            q_sqrt: sqrt_of_loadings(&l)?,
        })
    }

    /// The observation model at time `t`.
    pub fn observation(&self, theta: &[f64], inputs: &Inputs, t: f64) -> Result<LinearObs> {
        let mut frame = self.frame(theta);
        inputs.fill(&self.ir, t, &mut frame)?;
        let n = self.ir.count(Role::State);
        let m = self.ir.count(Role::Obs);
        let state0 = self.ir.range(Role::State).start;
        let mut h = Matrix::zeros(m, n);
        let mut c = vec![0.0; m];
        let mut r_sd = vec![f64::NAN; m];
        for (row, mean, sd) in &self.observation {
            let (offset, coeffs) = Propagation::coefficients(mean, &frame);
            c[*row] = offset;
            for (s, v) in coeffs {
                h[(*row, s - state0)] = v;
            }
            let sd = sd.eval(&frame);
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidDistribution {
                    dist: "gaussian",
                    reason: format!("sd = {sd} must be positive"),
                });
            }
            r_sd[*row] = sd;
        }
        Ok(LinearObs { h, c, r_sd })
    }

    /// Evaluates the whole system on `times` (the first entry is the start).
    pub fn system(&self, theta: &[f64], inputs: &Inputs, times: &[f64]) -> Result<LinearGaussianSystem> {
        let t0 = *times.first().ok_or_else(|| Error::InvalidArgument("empty time grid".into()))?;
        let initial = self.initial(theta, inputs, t0)?;
        let steps = times
            .windows(2)
            .map(|w| self.transition(theta, inputs, w[0], w[1] - w[0]))
            .collect::<Result<_>>()?;
        let obs = times.iter().map(|&t| self.observation(theta, inputs, t)).collect::<Result<_>>()?;
        Ok(LinearGaussianSystem {
            times: times.to_vec(),
            initial,
            steps,
            obs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Seed, Work};
    use crate::series::TimeSeries;

    const WINDKESSEL: &str = include_str!("../../../../models/windkessel/Windkessel.bi");
    const LORENZ: &str = include_str!("../../../../models/lorenz96/Lorenz96.bi");

    fn const_input(ir: &ModelIr, value: f64) -> Inputs {
        let mut s = TimeSeries::new(vec!["F".into()]);
        s.push_row(0.0, &[Some(value)]).unwrap();
        Inputs::from_series(ir, &s).unwrap()
    }

    #[test]
    fn windkessel_matrices() {
        let ir = crate::load_model(WINDKESSEL).unwrap();
        let lf = extract_linear_gaussian(&ir).unwrap();
        let (r, c, z, s2) = (1.2, 1.1, 0.05, 16.0);
        let theta = [r, c, z, s2];
        let fin = 90.0;
        let inputs = const_input(&ir, fin);
        // one sub-step of h = 0.01
        let h = 0.01;
        let step = lf.transition(&theta, &inputs, 0.0, h).unwrap();
        let a = (-h / (r * c)).exp();
        assert!((step.f[(0, 0)] - a).abs() < 1e-15);
        assert!((step.b[0] - r * (1.0 - a) * fin).abs() < 1e-12);
        let qsd = r * (1.0 - a) * h * s2.sqrt();
        assert!((step.q_sqrt[(0, 0)] - qsd).abs() < 1e-15);
        // four sub-steps compose
        let step4 = lf.transition(&theta, &inputs, 0.0, 0.04).unwrap();
        assert!((step4.f[(0, 0)] - a.powi(4)).abs() < 1e-14);
        let b4 = r * (1.0 - a) * fin * (1.0 + a + a * a + a * a * a);
        assert!((step4.b[0] - b4).abs() < 1e-10);
        let q4 = qsd * qsd * (1.0 + a * a + a.powi(4) + a.powi(6));
        assert!((step4.q_sqrt[(0, 0)].powi(2) - q4).abs() < 1e-12);
        let obs = lf.observation(&theta, &inputs, 0.0).unwrap();
        assert_eq!(obs.h, Matrix::from_rows(&[&[1.0]]));
        assert!((obs.c[0] - z * fin).abs() < 1e-12);
        assert_eq!(obs.r_sd, [2.0]);
        let init = lf.initial(&theta, &inputs, 0.0).unwrap();
        assert_eq!(init.mean, [90.0]);
        assert_eq!(init.u, Matrix::from_rows(&[&[15.0]]));
    }

    #[test]
    fn identity_dynamics() {
        let ir = crate::load_model(
            "model M { state x\n obs y\n sub initial { x ~ gaussian(0, 1) }\n sub transition { x <- x }\n \
             sub observation { y ~ gaussian(x, 0.5) } }",
        )
        .unwrap();
        let lf = extract_linear_gaussian(&ir).unwrap();
        let step = lf.transition(&[], &Inputs::none(), 0.0, 3.0).unwrap();
        assert_eq!(step.f, Matrix::from_rows(&[&[1.0]]));
        assert_eq!(step.b, [0.0]);
        assert_eq!(step.q_sqrt, Matrix::zeros(1, 1));
    }

    #[test]
    fn lorenz_is_nonlinear() {
        let ir = crate::load_model(LORENZ).unwrap();
        match extract_linear_gaussian(&ir) {
            Err(Error::NonlinearModel { block, reason, .. }) => {
                assert_eq!(block, "transition");
                assert!(reason.contains("second derivative"), "{reason}");
            }
            other => panic!("expected NonlinearModel, got {other:?}"),
        }
    }

    #[test]
    fn other_nonlinearities() {
        let cases = [
            ("x <- x*x", "second derivative"),
            ("x <- abs(x)", "abs"),
            ("x ~ gaussian(x, 1)", ""),
        ];
        for (stmt, reason) in cases {
            let src = alloc::format!(
                "model M {{ state x\n noise w\n obs y\n sub initial {{ x ~ gaussian(0, 1) }}\n \
                 sub transition {{ w ~ gaussian(0, 1)\n {stmt} }}\n sub observation {{ y ~ gaussian(x, 0.5) }} }}"
            );
            match crate::load_model(&src) {
                Ok(ir) => match extract_linear_gaussian(&ir) {
                    Err(Error::NonlinearModel { reason: r, .. }) => assert!(r.contains(reason), "{r}"),
                    other => panic!("{stmt}: {other:?}"),
                },
                Err(_) => assert!(reason.is_empty(), "{stmt} should validate"),
            }
        }
        let sd = "model M { state x\n noise w\n obs y\n sub initial { x ~ gaussian(0, 1) }\n \
                  sub transition { w ~ gaussian(0, 1)\n x <- x + w }\n sub observation { y ~ gaussian(x, exp(x)) } }";
        let ir = crate::load_model(sd).unwrap();
        assert!(matches!(extract_linear_gaussian(&ir), Err(Error::NonlinearModel { block: "observation", .. })));
        let gamma = "model M { state x\n obs y\n sub initial { x ~ gamma(2, 1) }\n \
                     sub transition { x <- x }\n sub observation { y ~ gaussian(x, 1) } }";
        let ir = crate::load_model(gamma).unwrap();
        assert!(matches!(extract_linear_gaussian(&ir), Err(Error::NonlinearModel { block: "initial", .. })));
    }

    /// A linear ODE with additive Wiener forcing: the affine RK4 must
    /// reproduce the value-level integrator for any draw.
    #[test]
    fn linear_ode_matches_simulator_pathwise() {
        let src = "model M { dim n(size = 2, boundary = 'cyclic')\n param a\n state x[n]\n noise dW[n]\n obs y[n]\n \
                   sub parameter { a ~ uniform(0.5, 1) }\n sub initial { x[n] ~ gaussian(1, 1) }\n \
                   sub transition(delta = 0.1) { dW[n] ~ wiener()\n ode(h = 0.03) {\n \
                   dx[n]/dt = -a*x[n] + 0.5*x[n+1] + dW[n]/0.1 + 1\n } }\n \
                   sub observation { y[n] ~ gaussian(x[n], 1) } }";
        let ir = crate::load_model(src).unwrap();
        let lf = extract_linear_gaussian(&ir).unwrap();
        let theta = [0.7];
        let dt = 0.25;
        let step = lf.transition(&theta, &Inputs::none(), 0.0, dt).unwrap();
        let mut w = Work::new(&ir);
        let mut rng = Seed::new(1).stream(0, 0);
        let n = 200_000;
        let x0 = [0.3, -0.2];
        let mut mean = [0.0; 2];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let mut x = x0;
            ir.step_transition(&mut w, &theta, &mut x, &Inputs::none(), 0.0, dt, &mut rng, true).unwrap();
            mean[0] += x[0];
            mean[1] += x[1];
            let m = step.f.matvec(&x0);
            let d = [x[0] - m[0] - step.b[0], x[1] - m[1] - step.b[1]];
            sq[0] += d[0] * d[0];
            sq[1] += d[0] * d[1];
            sq[2] += d[1] * d[1];
        }
        let q = step.q_sqrt.tmul(&step.q_sqrt);
        let pred = {
            let m = step.f.matvec(&x0);
            [m[0] + step.b[0], m[1] + step.b[1]]
        };
        let nf = n as f64;
        for i in 0..2 {
            let se = (q[(i, i)] / nf).sqrt();
            assert!((mean[i] / nf - pred[i]).abs() < 4.0 * se, "mean {i}");
        }
        let cov = [sq[0] / nf, sq[1] / nf, sq[2] / nf];
        let want = [q[(0, 0)], q[(0, 1)], q[(1, 1)]];
        for (c, w) in cov.iter().zip(want) {
            // variance of a sample (co)variance is at most ~2σ⁴/n for Gaussians
            let se = (2.0 * q[(0, 0)].max(q[(1, 1)]).powi(2) / nf).sqrt();
            assert!((c - w).abs() < 4.0 * se, "{c} vs {w}");
        }
    }

    /// One-step exact propagation vs. Monte Carlo moments of the simulator.
    #[test]
    fn windkessel_one_step_moments() {
        let ir = crate::load_model(WINDKESSEL).unwrap();
        let lf = extract_linear_gaussian(&ir).unwrap();
        let theta = [1.0, 1.5, 0.04, 25.0];
        let mut s = TimeSeries::new(vec!["F".into()]);
        s.push_row(0.0, &[Some(200.0)]).unwrap();
        s.push_row(0.015, &[Some(50.0)]).unwrap();
        s.push_row(0.025, &[Some(0.0)]).unwrap();
        let inputs = Inputs::from_series(&ir, &s).unwrap();
        let dt = 0.04;
        let prior = lf.initial(&theta, &inputs, 0.0).unwrap();
        let step = lf.transition(&theta, &inputs, 0.0, dt).unwrap();
        let q = step.q_sqrt.tmul(&step.q_sqrt)[(0, 0)];
        let sigma0 = prior.cov()[(0, 0)];
        let exact_mean = step.f[(0, 0)] * prior.mean[0] + step.b[0];
        let exact_var = step.f[(0, 0)].powi(2) * sigma0 + q;

        let mut w = Work::new(&ir);
        let n = 1_000_000;
        let mut rng = Seed::new(42).stream(0, 0);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let mut x = [0.0];
            ir.sample_initial(&mut w, &theta, &inputs, 0.0, &mut rng, &mut x).unwrap();
            ir.step_transition(&mut w, &theta, &mut x, &inputs, 0.0, dt, &mut rng, false).unwrap();
            s1 += x[0];
            s2 += x[0] * x[0];
        }
        let nf = n as f64;
        let m = s1 / nf;
        let v = s2 / nf - m * m;
        let se_m = (exact_var / nf).sqrt();
        let se_v = (2.0 * exact_var * exact_var / nf).sqrt();
        assert!((m - exact_mean).abs() < 4.0 * se_m, "{m} vs {exact_mean}");
        assert!((v - exact_var).abs() < 4.0 * se_v, "{v} vs {exact_var}");
    }
}
