//! Scalar helpers on top of `libm`, since `core` has no float intrinsics.

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// `log(Φ(b) - Φ(a))` for `a < b`, computed on the tail that keeps precision.
pub fn ln_norm_mass(a: f64, b: f64) -> f64 {
    let mass = if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    };
    ln(mass)
}

/// `log(sum(exp(xs)))`, or `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// Normalises log-weights into linear weights summing to one. Returns the
/// log of the unnormalised total, or `None` when every weight is zero.
pub fn normalize_log_weights(log_w: &[f64], out: &mut [f64]) -> Option<f64> {
    let total = log_sum_exp(log_w);
    if !total.is_finite() {
        return None;
    }
    for (o, &lw) in out.iter_mut().zip(log_w) {
        *o = exp(lw - total);
    }
    Some(total)
}

/// Effective sample size of a set of log-weights.
pub fn ess(log_w: &[f64]) -> f64 {
    let total = log_sum_exp(log_w);
    if !total.is_finite() {
        return 0.0;
    }
    let sq: f64 = log_w.iter().map(|&lw| exp(2.0 * (lw - total))).sum();
    1.0 / sq
}
