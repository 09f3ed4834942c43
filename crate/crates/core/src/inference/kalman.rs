//! Square-root Kalman filter with backward state sampling.
//!
//! Covariances are carried as upper-triangular factors, `Σ = UᵀU`. Each step
//! predicts, then corrects with whichever observation components are
//! present; the log-likelihood accumulates the Gaussian predictive density
//! of those components. A trajectory is drawn afterwards by the standard
//! backward recursion on the stored predicted and filtered factors.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_downdate, cholesky_factorize, cholesky_factorize_tol, log_det, solve_vec, triangular_solve,
    GaussianState, LinearGaussianSystem, LinearObs, LinearStep, Matrix, Side,
};
use crate::math::LN_SQRT_2PI;

/// The prediction made at one step, kept for backward sampling.
#[derive(Debug, Clone, PartialEq)]
struct Prediction {
    state: GaussianState,
    /// `Σ(t_{i−1}) Fᵀ`, the cross-covariance of consecutive states.
    cross: Matrix,
}

/// A Kalman filter that can be advanced one grid step at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanRun {
    pub loglik: f64,
    filtered: Vec<GaussianState>,
    predicted: Vec<Prediction>,
}

/// An observation at one step: the model, values and presence mask.
pub type KalmanObs<'a> = (&'a LinearObs, &'a [f64], &'a [bool]);

impl KalmanRun {
    pub fn start(initial: GaussianState) -> KalmanRun {
        KalmanRun {
            loglik: 0.0,
            filtered: alloc::vec![initial],
            predicted: Vec::new(),
        }
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.predicted.len()
    }

    pub fn current(&self) -> &GaussianState {
        self.filtered.last().expect("filter has an initial state")
    }

    /// Filtered distributions at every grid time so far.
    pub fn filtered(&self) -> &[GaussianState] {
        &self.filtered
    }

    /// Predicts through `step`, then corrects with `obs`. Returns the step's
    /// log-likelihood increment.
    pub fn advance(&mut self, step: &LinearStep, obs: Option<KalmanObs<'_>>) -> Result<f64> {
        let (pred, cross) = predict(self.current(), step)?;
        let (filtered, inc) = match obs {
            Some((model, y, present)) => correct(&pred, model, y, present)?,
            None => (pred.clone(), 0.0),
        };
        self.loglik += inc;
        self.filtered.push(filtered);
        self.predicted.push(Prediction { state: pred, cross });
        Ok(inc)
    }

    /// Draws `x(t_{0:s})` from the smoothing distribution.
    pub fn sample_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let s = self.steps();
        let mut traj = alloc::vec![Vec::new(); s + 1];
        traj[s] = self.filtered[s].sample(rng);
        for i in (0..s).rev() {
            let f = &self.filtered[i];
            let p = &self.predicted[i];
            // K = C Û⁻¹, ω = μ + K Û⁻ᵀ (x − μ̂), Σ_ω = Σ − K Kᵀ
            let k = triangular_solve(&p.state.u, &p.cross, Side::Right, false);
            let dev: Vec<f64> = traj[i + 1].iter().zip(&p.state.mean).map(|(x, m)| x - m).collect();
            let z = solve_vec(&p.state.u, &dev, true);
            let mut omega = k.matvec(&z);
            for (o, m) in omega.iter_mut().zip(&f.mean) {
                *o += m;
            }
            let cov = symmetrize(&f.cov().sub(&k.mul(&k.transpose())));
            let w = cholesky_factorize_tol(&cov, 1e-8)?;
            let zs: Vec<f64> = (0..omega.len()).map(|_| rng.sample(StandardNormal)).collect();
            let noise = w.tmatvec(&zs);
            traj[i] = omega.iter().zip(noise).map(|(o, e)| o + e).collect();
        }
        Ok(traj)
    }
}

fn symmetrize(m: &Matrix) -> Matrix {
    m.add(&m.transpose()).scale(0.5)
}

/// `μ̂ = Fμ + b`, `Σ̂ = FΣFᵀ + Q`; also returns `C = ΣFᵀ`.
pub fn predict(g: &GaussianState, step: &LinearStep) -> Result<(GaussianState, Matrix)> {
    let n = g.dim();
    if step.f.rows() != n || step.f.cols() != n || step.b.len() != n {
        return Err(Error::Dimension(alloc::format!("transition for {} states applied to {n}", step.f.rows())));
    }
    let mut mean = step.f.matvec(&g.mean);
    for (m, b) in mean.iter_mut().zip(&step.b) {
        *m += b;
    }
    let a = g.u.mul(&step.f.transpose()); // U Fᵀ
    let sigma = a.tmul(&a).add(&step.q_sqrt.tmul(&step.q_sqrt));
    let u = cholesky_factorize(&symmetrize(&sigma))?;
    let cross = g.u.tmul(&a);
    Ok((GaussianState::new(mean, u), cross))
}

/// Conditions `pred` on the present components of `y`. Returns the
/// posterior and the log predictive density of those components.
pub fn correct(pred: &GaussianState, model: &LinearObs, y: &[f64], present: &[bool]) -> Result<(GaussianState, f64)> {
    let rows: Vec<usize> = (0..present.len()).filter(|&i| present[i]).collect();
    if rows.is_empty() {
        return Ok((pred.clone(), 0.0));
    }
    let h = model.h.select_rows(&rows);
    let m = rows.len();
    // ν = Hμ̂ + c
    let nu = h.matvec(&pred.mean);
    let resid: Vec<f64> = rows.iter().zip(&nu).map(|(&r, v)| y[r] - v - model.c[r]).collect();
    // B = Û Hᵀ, so D = ÛᵀB and T = BᵀB + R
    let b = pred.u.mul(&h.transpose());
    let d = pred.u.tmul(&b);
    let mut t = b.tmul(&b);
    for (k, &r) in rows.iter().enumerate() {
        t[(k, k)] += model.r_sd[r] * model.r_sd[r];
    }
    let v = cholesky_factorize(&symmetrize(&t))?;
    let gain = triangular_solve(&v, &d, Side::Right, false); // K = D V⁻¹
    let z = solve_vec(&v, &resid, true); // V⁻ᵀ(y − ν)
    let mut mean = gain.matvec(&z);
    for (mi, p) in mean.iter_mut().zip(&pred.mean) {
        *mi += p;
    }
    let u = cholesky_downdate(&pred.u, &gain.transpose())?;
    let quad: f64 = z.iter().map(|x| x * x).sum();
    let ll = -(m as f64) * LN_SQRT_2PI - log_det(&v) - 0.5 * quad;
    Ok((GaussianState::new(mean, u), ll))
}

/// Result of [`kalman_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutcome {
    pub loglik: f64,
    pub filtered: Vec<GaussianState>,
    pub trajectory: Option<Vec<Vec<f64>>>,
}

/// Runs the filter over an evaluated system. `obs[i]` is the (values,
/// presence) pair at `system.times[i]`; entry 0 is ignored. A trajectory is
/// sampled when `rng` is given.
pub fn kalman_filter<R: Rng + ?Sized>(
    system: &LinearGaussianSystem,
    obs: &[Option<(Vec<f64>, Vec<bool>)>],
    rng: Option<&mut R>,
) -> Result<KalmanOutcome> {
    if obs.len() != system.times.len() || system.steps.len() + 1 != system.times.len() {
        return Err(Error::Dimension("observations and system must share the time grid".into()));
    }
    let mut run = KalmanRun::start(system.initial.clone());
    for (i, step) in system.steps.iter().enumerate() {
        let o = obs[i + 1].as_ref().map(|(y, p)| (&system.obs[i + 1], y.as_slice(), p.as_slice()));
        run.advance(step, o)?;
    }
    let trajectory = match rng {
        Some(r) => Some(run.sample_trajectory(r)?),
        None => None,
    };
    Ok(KalmanOutcome {
        loglik: run.loglik,
        filtered: run.filtered,
        trajectory,
    })
}
