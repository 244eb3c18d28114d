//! Standard bivariate normal orthant and rectangle probabilities.
//!
//! Upper-orthant probabilities use Gauss–Legendre quadrature along the
//! correlation path (the Drezner–Wesolowsky construction as refined by Genz),
//! switching to an asymptotic expansion plus correction for |rho| ≥ 0.925.
//! Absolute accuracy is around 1e-15.

use std::f64::consts::PI;

use super::normal::{std_normal_cdf, Interval};
use crate::error::{Error, Result};

const GL6_X: [f64; 3] = [0.932_469_514_203_152_2, 0.661_209_386_466_264_7, 0.238_619_186_083_197];
const GL6_W: [f64; 3] = [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4];
const GL12_X: [f64; 6] = [
    0.981_560_634_246_719_1,
    0.904_117_256_370_475,
    0.769_902_674_194_305,
    0.587_317_954_286_617_1,
    0.367_831_498_998_180_2,
    0.125_233_408_511_469_2,
];
const GL12_W: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const GL20_X: [f64; 10] = [
    0.993_128_599_185_094_9,
    0.963_971_927_277_913_8,
    0.912_234_428_251_325_9,
    0.839_116_971_822_218_8,
    0.746_331_906_460_150_8,
    0.636_053_680_726_515,
    0.510_867_001_950_827_1,
    0.373_706_088_715_419_6,
    0.227_785_851_141_645_1,
    0.076_526_521_133_497_33,
];
const GL20_W: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];

/// P(X > h, Y > k) for a standard bivariate normal with correlation `r`, |r| ≤ 1.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { std_normal_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return std_normal_cdf(-h);
    }
    if r == 0.0 {
        return std_normal_cdf(-h) * std_normal_cdf(-k);
    }
    let (xs, ws): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6_X, &GL6_W)
    } else if r.abs() < 0.75 {
        (&GL12_X, &GL12_W)
    } else {
        (&GL20_X, &GL20_W)
    };
    let tp = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for (&x, &w) in xs.iter().zip(ws) {
            for node in [1.0 - x, 1.0 + x] {
                let sn = (asr * node).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / tp + std_normal_cdf(-h) * std_normal_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let asr = -0.5 * (bs / a_s + hk);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * std_normal_cdf(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a *= 0.5;
            let mut acc = 0.0;
            for (&x, &w) in xs.iter().zip(ws) {
                for node in [1.0 - x, 1.0 + x] {
                    let xs2 = (a * node) * (a * node);
                    let asr = -0.5 * (bs / xs2 + hk);
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs2 * (1.0 + 5.0 * d * xs2);
                        let rs = (1.0 - xs2).sqrt();
                        let ep = (-0.5 * hk * xs2 / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        acc += w * asr.exp() * (sp - ep);
                    }
                }
            }
            bvn = (a * acc - bvn) / tp;
        }
        if r > 0.0 {
            bvn += std_normal_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                std_normal_cdf(k) - std_normal_cdf(h)
            } else {
                std_normal_cdf(-h) - std_normal_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// P(X ≤ x, Y ≤ y).
pub fn bvn_cdf(x: f64, y: f64, r: f64) -> f64 {
    bvn_upper(-x, -y, r)
}

/// Probability that a standard bivariate normal with correlation `rho`
/// falls in the rectangle `a × b` (each side half-open `(lower, upper]`).
pub fn bivariate_normal_rect(a: Interval, b: Interval, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("correlation {rho} outside (-1, 1)")));
    }
    Ok(rect_unchecked(a, b, rho))
}

pub(crate) fn rect_unchecked(a: Interval, b: Interval, rho: f64) -> f64 {
    // Canonical coordinate order makes the result exactly symmetric.
    let (a, b) = if (a.lower, a.upper).partial_cmp(&(b.lower, b.upper)) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    };
    let centre = |iv: &Interval| match (iv.lower.is_finite(), iv.upper.is_finite()) {
        (true, true) => 0.5 * (iv.lower + iv.upper),
        (true, false) => iv.lower,
        (false, true) => iv.upper,
        (false, false) => 0.0,
    };
    let p = if centre(&a) + centre(&b) > 0.0 {
        // Upper-orthant form avoids cancellation in the upper tail.
        bvn_upper(a.lower, b.lower, rho) - bvn_upper(a.upper, b.lower, rho) - bvn_upper(a.lower, b.upper, rho)
            + bvn_upper(a.upper, b.upper, rho)
    } else {
        bvn_cdf(a.upper, b.upper, rho) - bvn_cdf(a.lower, b.upper, rho) - bvn_cdf(a.upper, b.lower, rho)
            + bvn_cdf(a.lower, b.lower, rho)
    };
    p.clamp(0.0, 1.0)
}
