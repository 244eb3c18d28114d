//! Standard normal distribution functions and extended-real intervals.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Masses at or below this value are treated as numerically zero.
pub const MASS_FLOOR: f64 = 1e-300;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Half-open interval `(lower, upper]` on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Domain(format!("invalid interval ({lower}, {upper}]")));
        }
        Ok(Interval { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x <= self.upper
    }

    /// Shift both bounds by `-offset` (infinite bounds stay put).
    pub fn shifted(&self, offset: f64) -> Interval {
        Interval { lower: self.lower - offset, upper: self.upper - offset }
    }

    /// Standardize under N(mu, sigma^2).
    pub fn standardized(&self, mu: f64, sigma: f64) -> Interval {
        Interval { lower: (self.lower - mu) / sigma, upper: (self.upper - mu) / sigma }
    }

    /// Probability of the interval under N(0, 1).
    pub fn std_mass(&self) -> f64 {
        normal_interval_mass(self.lower, self.upper)
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x). Total on the extended reals.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), computed without cancellation in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Φ(b) − Φ(a) for a ≤ b, evaluated on whichever tail avoids cancellation.
pub fn normal_interval_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let m = if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    };
    m.max(0.0)
}

/// Φ⁻¹(p) for p in (0, 1).
///
/// Wichura's AS241 rational approximation followed by one Halley step.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile argument {p} outside (0, 1)")));
    }
    let x = as241(p);
    // Halley refinement on the tail that carries the precision.
    let err = if p < 0.5 { std_normal_cdf(x) - p } else { (1.0 - p) - std_normal_sf(x) };
    let d = std_normal_pdf(x);
    if d > 0.0 && err.is_finite() {
        let u = err / d;
        Ok(x - u / (1.0 + 0.5 * x * u))
    } else {
        Ok(x)
    }
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Density of the standard bivariate normal with correlation `rho`.
pub fn std_bvn_ln_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let one_m = 1.0 - rho * rho;
    -(2.0 * PI).ln() - 0.5 * one_m.ln() - (x * x - 2.0 * rho * x * y + y * y) / (2.0 * one_m)
}
