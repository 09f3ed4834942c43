//! Marginal Metropolis-Hastings.

use rand::Rng;

use crate::error::Result;
use crate::model::{RngStream, Seed, SHARED};

/// A target the MH kernel can move on. `evaluate` returns the (possibly
/// estimated) log-likelihood plus whatever the caller wants to keep about
/// the accepted point.
pub trait MhTarget {
    type Point: Clone;
    type Extra: Clone;

    fn propose(&self, from: &Self::Point, rng: &mut RngStream) -> Result<Self::Point>;
    /// `log q(to | from)`.
    fn log_proposal(&self, to: &Self::Point, from: &Self::Point) -> Result<f64>;
    fn log_prior(&self, p: &Self::Point) -> Result<f64>;
    fn evaluate(&self, p: &Self::Point, seed: Seed) -> Result<(f64, Self::Extra)>;
}

#[derive(Debug, Clone)]
pub struct ChainState<P, X> {
    pub point: P,
    pub extra: X,
    pub loglik: f64,
    pub log_prior: f64,
}

impl<P: Clone, X: Clone> ChainState<P, X> {
    /// Evaluates `point` to build a state.
    pub fn new<T: MhTarget<Point = P, Extra = X>>(target: &T, point: P, seed: Seed) -> Result<Self> {
        let log_prior = target.log_prior(&point)?;
        let (loglik, extra) = target.evaluate(&point, seed)?;
        Ok(ChainState {
            point,
            extra,
            loglik,
            log_prior,
        })
    }
}

/// One MH transition. Returns the new state and whether the proposal was
/// accepted; a rejected step returns `state` unchanged.
pub fn mh_step<T: MhTarget>(
    target: &T,
    state: &ChainState<T::Point, T::Extra>,
    seed: Seed,
) -> Result<(ChainState<T::Point, T::Extra>, bool)> {
    let mut rng = seed.stream(SHARED, 0);
    let proposed = target.propose(&state.point, &mut rng)?;
    let log_prior = target.log_prior(&proposed)?;
    // outside the prior support: no need to run the filter
    if log_prior == f64::NEG_INFINITY || log_prior.is_nan() {
        return Ok((state.clone(), false));
    }
    let (loglik, extra) = target.evaluate(&proposed, seed.fork(2))?;
    let ratio = loglik + log_prior + target.log_proposal(&state.point, &proposed)?
        - state.loglik
        - state.log_prior
        - target.log_proposal(&proposed, &state.point)?;
    let u: f64 = rng.random();
    // NaN compares false and rejects
    if crate::math::ln(u) <= ratio {
        Ok((
            ChainState {
                point: proposed,
                extra,
                loglik,
                log_prior,
            },
            true,
        ))
    } else {
        Ok((state.clone(), false))
    }
}

/// Runs `n` MH steps from `start`, handing every state (after each step)
/// to `visit`. Returns the number of accepted proposals.
pub fn mh_sample<T: MhTarget>(
    target: &T,
    start: ChainState<T::Point, T::Extra>,
    n: usize,
    seed: Seed,
    mut visit: impl FnMut(usize, &ChainState<T::Point, T::Extra>, bool) -> Result<()>,
) -> Result<usize> {
    let mut state = start;
    let mut accepted = 0;
    for k in 0..n {
        let (next, acc) = mh_step(target, &state, seed.fork(k as u64))?;
        state = next;
        accepted += acc as usize;
        visit(k, &state, acc)?;
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use std::vec;
    use std::vec::Vec;

    /// Three states with an asymmetric proposal and a deterministic
    /// "likelihood", so the MH kernel is exactly computable.
    struct Toy {
        prior: [f64; 3],
        lik: [f64; 3],
        q: [[f64; 3]; 3],
    }

    impl Toy {
        fn new() -> Toy {
            Toy {
                prior: [0.2, 0.5, 0.3],
                lik: [0.9, 0.3, 0.6],
                q: [[0.1, 0.6, 0.3], [0.5, 0.2, 0.3], [0.25, 0.25, 0.5]],
            }
        }

        fn exact_kernel(&self) -> [[f64; 3]; 3] {
            let mut k = [[0.0; 3]; 3];
            for i in 0..3 {
                let pi = self.prior[i] * self.lik[i];
                let mut stay = 1.0;
                for j in 0..3 {
                    if i == j {
                        continue;
                    }
                    let pj = self.prior[j] * self.lik[j];
                    let a = (pj * self.q[j][i] / (pi * self.q[i][j])).min(1.0);
                    k[i][j] = self.q[i][j] * a;
                    stay -= k[i][j];
                }
                k[i][i] = stay;
            }
            k
        }
    }

    impl MhTarget for Toy {
        type Point = usize;
        type Extra = ();
        fn propose(&self, from: &usize, rng: &mut RngStream) -> Result<usize> {
            let u: f64 = rng.random();
            let row = &self.q[*from];
            Ok(if u < row[0] {
                0
            } else if u < row[0] + row[1] {
                1
            } else {
                2
            })
        }
        fn log_proposal(&self, to: &usize, from: &usize) -> Result<f64> {
            Ok(self.q[*from][*to].ln())
        }
        fn log_prior(&self, p: &usize) -> Result<f64> {
            Ok(self.prior[*p].ln())
        }
        fn evaluate(&self, p: &usize, _: Seed) -> Result<(f64, ())> {
            Ok((self.lik[*p].ln(), ()))
        }
    }

    /// Empirical one-step transition matrix from `n` steps per start state.
    pub(crate) fn toy_kernel_error(n: usize, seed: u64) -> f64 {
        let toy = Toy::new();
        let exact = toy.exact_kernel();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            let state = ChainState::new(&toy, i, Seed::new(0)).unwrap();
            let mut counts = [0usize; 3];
            let base = Seed::new(seed).fork(i as u64);
            for k in 0..n {
                let (next, _) = mh_step(&toy, &state, base.fork(k as u64)).unwrap();
                counts[next.point] += 1;
            }
            for j in 0..3 {
                worst = worst.max((counts[j] as f64 / n as f64 - exact[i][j]).abs());
            }
        }
        worst
    }

    #[test]
    fn toy_kernel_matches_to_three_decimals() {
        let err = toy_kernel_error(2_000_000, 8);
        assert!(err < 1e-3, "max |K_emp - K| = {err}");
    }

    #[test]
    fn exact_kernel_is_reversible() {
        let toy = Toy::new();
        let k = toy.exact_kernel();
        for i in 0..3 {
            for j in 0..3 {
                let a = toy.prior[i] * toy.lik[i] * k[i][j];
                let b = toy.prior[j] * toy.lik[j] * k[j][i];
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    /// A symmetric random walk on a flat target always accepts; a proposal
    /// off the support always rejects.
    struct Flat {
        support: f64,
    }

    impl MhTarget for Flat {
        type Point = f64;
        type Extra = ();
        fn propose(&self, from: &f64, rng: &mut RngStream) -> Result<f64> {
            Ok(from + rng.random::<f64>() - 0.5)
        }
        fn log_proposal(&self, _: &f64, _: &f64) -> Result<f64> {
            Ok(0.0)
        }
        fn log_prior(&self, p: &f64) -> Result<f64> {
            Ok(if p.abs() <= self.support { 0.0 } else { f64::NEG_INFINITY })
        }
        fn evaluate(&self, p: &f64, _: Seed) -> Result<(f64, ())> {
            if p.abs() > self.support {
                return Err(Error::InvalidArgument("evaluated outside the support".into()));
            }
            Ok((0.0, ()))
        }
    }

    #[test]
    fn flat_target_always_accepts() {
        let t = Flat { support: 1e9 };
        let start = ChainState::new(&t, 0.0, Seed::new(1)).unwrap();
        let acc = mh_sample(&t, start, 500, Seed::new(2), |_, _, a| {
            assert!(a);
            Ok(())
        })
        .unwrap();
        assert_eq!(acc, 500);
    }

    #[test]
    fn zero_prior_rejects_without_evaluation() {
        // the support is a single point, every proposal leaves it
        let t = Flat { support: 0.0 };
        let start = ChainState::new(&t, 0.0, Seed::new(1)).unwrap();
        let mut seen = Vec::new();
        let acc = mh_sample(&t, start, 50, Seed::new(3), |_, s, _| {
            seen.push(s.point);
            Ok(())
        })
        .unwrap();
        assert_eq!(acc, 0);
        assert_eq!(seen, vec![0.0; 50]);
    }

    #[test]
    fn zero_steps_records_nothing() {
        let t = Flat { support: 1.0 };
        let start = ChainState::new(&t, 0.0, Seed::new(1)).unwrap();
        let mut n = 0;
        mh_sample(&t, start, 0, Seed::new(3), |_, _, _| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 0);
    }
}
