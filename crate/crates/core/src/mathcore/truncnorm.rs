//! Truncated univariate normal: moments and sampling.

use rand::Rng;

use super::normal::{
    std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf, Interval, MASS_FLOOR,
};
use crate::error::{Error, Result};

/// Below this mass inverse-CDF sampling loses precision; switch to rejection.
const INVERSE_CDF_MIN_MASS: f64 = 1e-10;

/// E[W | W ∈ iv] for W ~ N(mu, sigma²).
pub fn truncnorm_mean(iv: Interval, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let s = iv.standardized(mu, sigma);
    let mass = s.std_mass();
    if mass < MASS_FLOOR {
        return Err(Error::DegenerateInterval { lower: iv.lower, upper: iv.upper });
    }
    let shift = (std_normal_pdf(s.lower) - std_normal_pdf(s.upper)) / mass;
    // Rounding can push the value a hair outside; the mean lies in the closure.
    Ok((mu + sigma * shift).clamp(iv.lower, iv.upper))
}

/// CDF of the truncated standard-scale distribution at `x`.
pub fn truncnorm_cdf(x: f64, iv: Interval, mu: f64, sigma: f64) -> f64 {
    let s = iv.standardized(mu, sigma);
    let z = (x - mu) / sigma;
    if z <= s.lower {
        return 0.0;
    }
    if z >= s.upper {
        return 1.0;
    }
    let mass = s.std_mass();
    if s.lower >= 0.0 {
        (std_normal_sf(s.lower) - std_normal_sf(z)) / mass
    } else {
        (std_normal_cdf(z) - std_normal_cdf(s.lower)) / mass
    }
}

/// One draw from N(mu, sigma²) restricted to `iv`.
pub fn truncnorm_sample<R: Rng + ?Sized>(iv: Interval, mu: f64, sigma: f64, rng: &mut R) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let s = iv.standardized(mu, sigma);
    let mass = s.std_mass();
    if mass < MASS_FLOOR {
        return Err(Error::DegenerateInterval { lower: iv.lower, upper: iv.upper });
    }
    let z = std_sample(s.lower, s.upper, mass, rng);
    let x = mu + sigma * z;
    // Keep the half-open support exact after rescaling.
    Ok(if x <= iv.lower {
        next_up(iv.lower)
    } else if x > iv.upper {
        iv.upper
    } else {
        x
    })
}

fn std_sample<R: Rng + ?Sized>(a: f64, b: f64, mass: f64, rng: &mut R) -> f64 {
    if mass >= INVERSE_CDF_MIN_MASS {
        let u: f64 = rng.random();
        if a >= 0.0 {
            // Upper tail: invert the survival function.
            let hi = std_normal_sf(a);
            let lo = std_normal_sf(b);
            let p = lo + u * (hi - lo);
            return -quantile_clamped(p);
        }
        if b <= 0.0 {
            let lo = std_normal_cdf(a);
            let hi = std_normal_cdf(b);
            return quantile_clamped(lo + u * (hi - lo));
        }
        let lo = std_normal_cdf(a);
        let hi = std_normal_cdf(b);
        return quantile_clamped(lo + u * (hi - lo));
    }
    // Tiny mass only happens in a tail; mirror to the upper one.
    if a >= 0.0 {
        tail_rejection(a, b, rng)
    } else {
        -tail_rejection(-b, -a, rng)
    }
}

fn quantile_clamped(p: f64) -> f64 {
    let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    std_normal_quantile(p).unwrap_or(0.0)
}

/// Exponential-proposal rejection for a ≥ 0 (Robert 1995), proposal
/// truncated to [a, b] so two-sided tail intervals are handled directly.
fn tail_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    let width = b - a;
    let trunc = if width.is_finite() { -(-lambda * width).exp_m1() } else { 1.0 };
    loop {
        let u: f64 = rng.random();
        let e = -(-u * trunc).ln_1p() / lambda;
        let x = a + e;
        let accept: f64 = rng.random();
        if accept.ln() <= -0.5 * (x - lambda) * (x - lambda) && x > a && x <= b {
            return x;
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_infinite() {
        return x;
    }
    let bits = x.to_bits();
    if x == 0.0 {
        f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}
