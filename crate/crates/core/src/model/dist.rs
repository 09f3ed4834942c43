//! The distributions available in model files.

use alloc::format;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{self, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistKind {
    Gaussian,
    TruncatedGaussian,
    Gamma,
    InverseGamma,
    Uniform,
    Wiener,
}

impl DistKind {
    /// Looks up a distribution by its model-file name; `normal` is an alias
    /// of `gaussian`.
    pub fn from_name(name: &str) -> Option<DistKind> {
        Some(match name {
            "gaussian" | "normal" => DistKind::Gaussian,
            "truncated_gaussian" | "truncated_normal" => DistKind::TruncatedGaussian,
            "gamma" => DistKind::Gamma,
            "inverse_gamma" => DistKind::InverseGamma,
            "uniform" => DistKind::Uniform,
            "wiener" => DistKind::Wiener,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DistKind::Gaussian => "gaussian",
            DistKind::TruncatedGaussian => "truncated_gaussian",
            DistKind::Gamma => "gamma",
            DistKind::InverseGamma => "inverse_gamma",
            DistKind::Uniform => "uniform",
            DistKind::Wiener => "wiener",
        }
    }

    /// Canonical parameter names, in positional order.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            DistKind::Gaussian => &["mean", "sd"],
            DistKind::TruncatedGaussian => &["mean", "sd", "lower", "upper"],
            DistKind::Gamma | DistKind::InverseGamma => &["shape", "scale"],
            DistKind::Uniform => &["lower", "upper"],
            DistKind::Wiener => &[],
        }
    }

    /// Number of leading parameters that must be given.
    pub fn required(self) -> usize {
        match self {
            DistKind::TruncatedGaussian => 2,
            k => k.params().len(),
        }
    }

    /// Value used for an omitted optional parameter.
    pub fn default_param(self, i: usize) -> f64 {
        match (self, i) {
            (DistKind::TruncatedGaussian, 2) => f64::NEG_INFINITY,
            (DistKind::TruncatedGaussian, 3) => f64::INFINITY,
            _ => f64::NAN,
        }
    }
}

/// A distribution with evaluated, checked parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Gaussian { mean: f64, sd: f64 },
    TruncatedGaussian { mean: f64, sd: f64, lower: f64, upper: f64 },
    Gamma { shape: f64, scale: f64 },
    InverseGamma { shape: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

fn invalid(kind: DistKind, reason: alloc::string::String) -> Error {
    Error::InvalidDistribution {
        dist: kind.name(),
        reason,
    }
}

impl Dist {
    /// Builds a distribution from evaluated arguments in canonical order.
    /// `dt` is the elapsed time, used only by `wiener`.
    pub fn new(kind: DistKind, args: &[f64], dt: f64) -> Result<Dist> {
        let arg = |i: usize| args.get(i).copied().unwrap_or_else(|| kind.default_param(i));
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(invalid(kind, format!("{name} = {x} is not finite")))
            }
        };
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(invalid(kind, format!("{name} = {x} must be positive")))
            }
        };
        Ok(match kind {
            DistKind::Gaussian => Dist::Gaussian {
                mean: finite("mean", arg(0))?,
                sd: positive("sd", arg(1))?,
            },
            DistKind::Wiener => Dist::Gaussian {
                mean: 0.0,
                sd: positive("sd", math::sqrt(dt))?,
            },
            DistKind::TruncatedGaussian => {
                let (lower, upper) = (arg(2), arg(3));
                if lower.is_nan() || upper.is_nan() || lower >= upper {
                    return Err(invalid(kind, format!("need lower < upper, got [{lower}, {upper}]")));
                }
                Dist::TruncatedGaussian {
                    mean: finite("mean", arg(0))?,
                    sd: positive("sd", arg(1))?,
                    lower,
                    upper,
                }
            }
            DistKind::Gamma => Dist::Gamma {
                shape: positive("shape", arg(0))?,
                scale: positive("scale", arg(1))?,
            },
            DistKind::InverseGamma => Dist::InverseGamma {
                shape: positive("shape", arg(0))?,
                scale: positive("scale", arg(1))?,
            },
            DistKind::Uniform => {
                let (lower, upper) = (finite("lower", arg(0))?, finite("upper", arg(1))?);
                if lower >= upper {
                    return Err(invalid(kind, format!("need lower < upper, got [{lower}, {upper}]")));
                }
                Dist::Uniform { lower, upper }
            }
        })
    }

    /// Log-density at `x`; `-inf` outside the support.
    pub fn logpdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Dist::Gaussian { mean, sd } => normal_logpdf(x, mean, sd),
            Dist::TruncatedGaussian { mean, sd, lower, upper } => {
                if x < lower || x > upper {
                    return f64::NEG_INFINITY;
                }
                normal_logpdf(x, mean, sd) - math::ln_norm_mass((lower - mean) / sd, (upper - mean) / sd)
            }
            Dist::Gamma { shape, scale } => {
                if x <= 0.0 || x.is_infinite() {
                    return f64::NEG_INFINITY;
                }
                (shape - 1.0) * math::ln(x) - x / scale - math::ln_gamma(shape) - shape * math::ln(scale)
            }
            Dist::InverseGamma { shape, scale } => {
                if x <= 0.0 || x.is_infinite() {
                    return f64::NEG_INFINITY;
                }
                shape * math::ln(scale) - math::ln_gamma(shape) - (shape + 1.0) * math::ln(x) - scale / x
            }
            Dist::Uniform { lower, upper } => {
                if x < lower || x > upper {
                    f64::NEG_INFINITY
                } else {
                    -math::ln(upper - lower)
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Dist::TruncatedGaussian { mean, sd, lower, upper } => {
                let z = std_truncated_normal((lower - mean) / sd, (upper - mean) / sd, rng);
                (mean + sd * z).clamp(lower, upper)
            }
            Dist::Gamma { shape, scale } => gamma(shape, rng) * scale,
            Dist::InverseGamma { shape, scale } => scale / gamma(shape, rng),
            Dist::Uniform { lower, upper } => {
                let u: f64 = rng.random();
                lower + (upper - lower) * u
            }
        }
    }

    /// Support as a closed interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Dist::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Dist::TruncatedGaussian { lower, upper, .. } | Dist::Uniform { lower, upper } => (lower, upper),
            Dist::Gamma { .. } | Dist::InverseGamma { .. } => (0.0, f64::INFINITY),
        }
    }
}

#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - LN_SQRT_2PI - math::ln(sd)
}

fn gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    // Parameters were checked on construction, so this cannot fail.
    rand_distr::Gamma::new(shape, 1.0)
        .map(|g| g.sample(rng))
        .unwrap_or(f64::NAN)
}

/// Uniform on the open interval (0, 1).
fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Exact draw from N(0, 1) restricted to [a, b].
///
/// Plain rejection when the interval holds enough mass, otherwise
/// Robert's (1995) translated-exponential proposal in the tails and uniform
/// proposals on narrow intervals.
pub fn std_truncated_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a == b {
        return a;
    }
    if b <= 0.0 {
        return -std_truncated_normal(-b, -a, rng);
    }
    let mass = math::exp(math::ln_norm_mass(a, b));
    if mass > 0.25 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a && z <= b {
                return z;
            }
        }
    }
    if a < 0.0 {
        // a < 0 < b with little mass in between: the interval is narrow.
        return uniform_rejection(a, b, 0.0, rng);
    }
    let lambda = 0.5 * (a + math::sqrt(a * a + 4.0));
    if lambda * (b - a) < core::f64::consts::LN_2 {
        return uniform_rejection(a, b, a, rng);
    }
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / lambda;
        if z > b {
            continue;
        }
        let d = z - lambda;
        if math::ln(open01(rng)) <= -0.5 * d * d {
            return z;
        }
    }
}

/// Uniform proposals on [a, b]; `mode` is the point of the interval closest
/// to zero, where the density peaks.
fn uniform_rejection<R: Rng + ?Sized>(a: f64, b: f64, mode: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let z = a + (b - a) * u;
        if math::ln(open01(rng)) <= 0.5 * (mode * mode - z * z) {
            return z;
        }
    }
}
