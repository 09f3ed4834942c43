//! Resampling schemes.

use core::fmt;
use core::str::FromStr;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampler {
    Multinomial,
    #[default]
    Stratified,
    Systematic,
}

impl Resampler {
    pub const ALL: [Resampler; 3] = [Resampler::Multinomial, Resampler::Stratified, Resampler::Systematic];

    pub fn name(self) -> &'static str {
        match self {
            Resampler::Multinomial => "multinomial",
            Resampler::Stratified => "stratified",
            Resampler::Systematic => "systematic",
        }
    }
}

impl fmt::Display for Resampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Resampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Resampler> {
        Resampler::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown resampler `{s}`")))
    }
}

/// Draws `out.len()` ancestor indices with `E[#copies of k] = P·w_k/Σw`.
/// Weights must be non-negative (any scale).
pub fn resample<R: Rng + ?Sized>(weights: &[f64], scheme: Resampler, rng: &mut R, out: &mut [usize]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::ZeroWeights);
    }
    let p = out.len();
    match scheme {
        Resampler::Multinomial => {
            // independent draws by inversion of the cumulative sum
            let mut cum = alloc::vec::Vec::with_capacity(weights.len());
            let mut acc = 0.0;
            for w in weights {
                acc += w;
                cum.push(acc);
            }
            for a in out.iter_mut() {
                let u = rng.random::<f64>() * acc;
                *a = cum.partition_point(|&c| c <= u).min(weights.len() - 1);
                // never pick a zero-weight index sitting on the boundary
                while weights[*a] == 0.0 && *a + 1 < weights.len() {
                    *a += 1;
                }
            }
        }
        Resampler::Stratified | Resampler::Systematic => {
            let shared = rng.random::<f64>();
            let mut k = 0;
            let mut acc = weights[0];
            for (j, a) in out.iter_mut().enumerate() {
                let u = if j == 0 || scheme == Resampler::Systematic { shared } else { rng.random::<f64>() };
                let target = (j as f64 + u) / p as f64 * total;
                while acc <= target && k + 1 < weights.len() {
                    k += 1;
                    acc += weights[k];
                }
                while weights[k] == 0.0 && k + 1 < weights.len() {
                    k += 1;
                    acc += weights[k];
                }
                *a = k;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Seed;
    use std::vec;
    use std::vec::Vec;

    #[test]
    fn degenerate_and_trivial_cases() {
        let mut rng = Seed::new(1).stream(0, 0);
        let mut out = [9; 5];
        for s in Resampler::ALL {
            resample(&[1.0, 0.0, 0.0, 0.0, 0.0], s, &mut rng, &mut out).unwrap();
            assert_eq!(out, [0; 5]);
            assert_eq!(resample(&[0.0, 0.0], s, &mut rng, &mut out), Err(Error::ZeroWeights));
        }
        let mut two = [0; 2];
        for _ in 0..100 {
            resample(&[0.5, 0.5], Resampler::Systematic, &mut rng, &mut two).unwrap();
            assert_eq!(two, [0, 1]);
        }
    }

    #[test]
    fn multinomial_uniform_chi_square() {
        let mut rng = Seed::new(5).stream(0, 0);
        let mut counts = [0usize; 4];
        let mut out = [0; 4];
        let draws = 25_000;
        for _ in 0..draws {
            resample(&[1.0; 4], Resampler::Multinomial, &mut rng, &mut out).unwrap();
            for a in out {
                counts[a] += 1;
            }
        }
        let expected = (draws * 4) as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 3 degrees of freedom: P(χ² > 16.27) = 0.001
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
    }

    /// Mean copy counts over many replicates match `P·w_k` for every scheme.
    pub(crate) fn max_copy_deviation(scheme: Resampler, weights: &[f64], reps: usize, seed: u64) -> f64 {
        let p = weights.len();
        let total: f64 = weights.iter().sum();
        let mut sum = vec![0.0; p];
        let mut sq = vec![0.0; p];
        let mut out = vec![0; p];
        let mut copies = vec![0.0; p];
        let mut rng = Seed::new(seed).stream(0, 0);
        for _ in 0..reps {
            resample(weights, scheme, &mut rng, &mut out).unwrap();
            copies.fill(0.0);
            for &a in &out {
                copies[a] += 1.0;
            }
            for k in 0..p {
                sum[k] += copies[k];
                sq[k] += copies[k] * copies[k];
            }
        }
        let n = reps as f64;
        (0..p)
            .map(|k| {
                let mean = sum[k] / n;
                let var = (sq[k] / n - mean * mean).max(0.0);
                let se = (var / n).sqrt().max(1e-12);
                let dev = (mean - p as f64 * weights[k] / total).abs();
                if dev < 1e-12 { 0.0 } else { dev / se }
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn expected_copies() {
        for p in [2usize, 7, 16] {
            let w: Vec<f64> = (0..p).map(|k| 1.0 + (k * 7 % 5) as f64).collect();
            for s in Resampler::ALL {
                let z = max_copy_deviation(s, &w, 20_000, p as u64);
                assert!(z < 4.0, "{s} P={p}: {z} SE");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Resampler::ALL {
            assert_eq!(s.name().parse::<Resampler>().unwrap(), s);
        }
        assert!("residual".parse::<Resampler>().is_err());
    }
}
