//! The Beckner-Hirschman side: `h = sqrt(f(2 sqrt(pi) x)) g(x)`, its Fourier
//! transform, Shannon entropies, and weighted distances to the Gaussians
//! `G_{a,r}(x) = (2a/pi)^{1/4} exp(-a (x - r)^2)`.

mod spectral;
mod weighted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{Family, Piece, PiecewiseLogDensity, Symmetry};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{inv_log_sf, log1mexp, LogValue, LN_2};

pub use spectral::{
    bhi_deficit, fourier_transform, fourier_wiener_remainder, shannon_entropy, BhiReport, CarlenReport, Entropy,
    GridSpec, SpectralMeta, SpectralProfile,
};
pub use weighted::{
    default_norm_config, dist_to_optimizers, dist_to_optimizers_with, normalized_distance_ratio, optimizer_norm_closed_form, truncated_optimizer_norm,
    weighted_lp_norm, weighted_lp_norm_with, Difference, DistanceResult, TruncatedNorm,
};

/// `2 sqrt(pi)`, the scale between `gamma`-space and the `h` variable.
pub const TWO_SQRT_PI: f64 = 3.544_907_701_811_032;

/// `ln g(x)` with `g(x) = 2^{1/4} exp(-pi x^2)`.
pub fn ln_g(x: f64) -> f64 {
    0.25 * LN_2 - std::f64::consts::PI * x * x
}

/// How `ln phi(x)` behaves as `|x| -> inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    /// `ln phi ~ -A x^2`.
    Gaussian(f64),
    /// `ln phi ~ -q ln|x|`.
    Power(f64),
}

impl Tail {
    /// The slower of two tails.
    pub fn slower(self, other: Tail) -> Tail {
        match (self, other) {
            (Tail::Gaussian(a), Tail::Gaussian(b)) => Tail::Gaussian(a.min(b)),
            (Tail::Power(a), Tail::Power(b)) => Tail::Power(a.min(b)),
            (Tail::Power(a), _) | (_, Tail::Power(a)) => Tail::Power(a),
        }
    }
}

/// A nonnegative function on the line known through `ln phi`.
pub trait Profile: Sync {
    fn ln_value(&self, x: f64) -> f64;

    /// Points where `phi` is less smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn is_even(&self) -> bool;

    fn tail(&self) -> Tail;

    /// A half-width `X` with `int_{|x| > X} phi^2 dx < tol`.
    fn support_half_width(&self, tol: f64) -> Result<f64>;
}

/// `h(x) = sqrt(f(2 sqrt(pi) x)) g(x)`; `||h||_2^2 = int f dgamma`.
#[derive(Clone, Debug)]
pub struct BhiProfile {
    density: PiecewiseLogDensity,
}

pub fn lsi_to_bhi_transform(f: &PiecewiseLogDensity) -> BhiProfile {
    BhiProfile { density: f.clone() }
}

impl BhiProfile {
    pub fn density(&self) -> &PiecewiseLogDensity {
        &self.density
    }

    pub fn value(&self, x: f64) -> LogValue {
        LogValue::from_ln(self.ln_value(x))
    }

    fn outer_is_rational(&self) -> bool {
        let segs = self.density.segments();
        let last = segs.last().map(|s| matches!(s.piece, Piece::Rational { .. }) && s.hi == f64::INFINITY);
        let first = segs.first().map(|s| matches!(s.piece, Piece::Rational { .. }) && s.lo == f64::NEG_INFINITY);
        last.unwrap_or(false) || first.unwrap_or(false)
    }
}

impl Profile for BhiProfile {
    fn ln_value(&self, x: f64) -> f64 {
        0.5 * self.density.log_density(TWO_SQRT_PI * x) + ln_g(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.density.breakpoints().into_iter().map(|y| y / TWO_SQRT_PI).collect()
    }

    fn is_even(&self) -> bool {
        self.density.symmetry() == Symmetry::Even || matches!(self.density.family(), Family::Gaussian)
    }

    fn tail(&self) -> Tail {
        if self.outer_is_rational() {
            Tail::Power(1.0)
        } else {
            Tail::Gaussian(std::f64::consts::PI)
        }
    }

    fn support_half_width(&self, tol: f64) -> Result<f64> {
        let lt = (0.5 * tol).ln();
        let hi = self.density.inv_log_sf(lt)?;
        let lo = self.density.inv_log_cdf(lt)?;
        let x = hi.abs().max(lo.abs()) / TWO_SQRT_PI;
        if !(x < 1e6) {
            return Err(Error::TruncationViolated { tail_mass: tol, half_width: x });
        }
        Ok(x)
    }
}

/// `G_{a,r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub a: f64,
    pub r: f64,
}

impl OptimizerParams {
    pub fn new(a: f64, r: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("a", format!("must be finite and > 0, got {a}")));
        }
        if !r.is_finite() {
            return Err(invalid("r", format!("must be finite, got {r}")));
        }
        Ok(OptimizerParams { a, r })
    }

    /// `G_{pi, 0} = g`.
    pub fn standard() -> Self {
        OptimizerParams { a: std::f64::consts::PI, r: 0.0 }
    }
}

pub fn optimizer_eval(params: &OptimizerParams, x: f64) -> Result<LogValue> {
    let p = OptimizerParams::new(params.a, params.r)?;
    Ok(LogValue::from_ln(p.ln_value(x)))
}

impl Profile for OptimizerParams {
    fn ln_value(&self, x: f64) -> f64 {
        0.25 * (2.0 * self.a / std::f64::consts::PI).ln() - self.a * (x - self.r).powi(2)
    }

    fn is_even(&self) -> bool {
        self.r == 0.0
    }

    fn tail(&self) -> Tail {
        Tail::Gaussian(self.a)
    }

    fn support_half_width(&self, tol: f64) -> Result<f64> {
        // int_{|x - r| > t} G^2 = 2 Q(2 sqrt(a) t)
        let t = inv_log_sf((0.5 * tol).ln()) / (2.0 * self.a.sqrt());
        Ok(self.r.abs() + t.max(0.0))
    }
}

/// Reference measure for weighted norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum WeightSpec {
    Lebesgue,
    /// `|x|^lambda dx`.
    Power(f64),
    /// `g^{-theta} dx`.
    InvGauss(f64),
}

impl WeightSpec {
    pub fn validate(self) -> Result<Self> {
        match self {
            WeightSpec::Power(l) if !(l >= 0.0 && l.is_finite()) => {
                Err(invalid("weight", format!("power exponent must be finite and >= 0, got {l}")))
            }
            WeightSpec::InvGauss(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(invalid("weight", format!("inverse-Gaussian exponent must be finite and >= 0, got {t}")))
            }
            w => Ok(w),
        }
    }

    pub fn ln_weight(self, x: f64) -> f64 {
        match self {
            WeightSpec::Lebesgue => 0.0,
            WeightSpec::Power(l) if l == 0.0 => 0.0,
            WeightSpec::Power(l) => l * x.abs().ln(),
            WeightSpec::InvGauss(t) => -t * ln_g(x),
        }
    }

    pub fn kind(self) -> &'static str {
        match self {
            WeightSpec::Lebesgue => "lebesgue",
            WeightSpec::Power(_) => "power",
            WeightSpec::InvGauss(_) => "invgauss",
        }
    }

    pub fn param(self) -> f64 {
        match self {
            WeightSpec::Lebesgue => 0.0,
            WeightSpec::Power(l) => l,
            WeightSpec::InvGauss(t) => t,
        }
    }

    /// Whether `int phi^p dw` is finite for a profile with the given tail.
    pub fn integrable(self, tail: Tail, p: f64) -> bool {
        let pi = std::f64::consts::PI;
        match (tail, self) {
            (Tail::Gaussian(a), WeightSpec::InvGauss(t)) => p * a > t * pi,
            (Tail::Gaussian(_), _) => true,
            (Tail::Power(_), WeightSpec::InvGauss(t)) => t == 0.0,
            (Tail::Power(q), WeightSpec::Power(l)) => p * q - l > 1.0,
            (Tail::Power(q), WeightSpec::Lebesgue) => p * q > 1.0,
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Lebesgue => write!(f, "lebesgue"),
            WeightSpec::Power(l) => write!(f, "power:{l}"),
            WeightSpec::InvGauss(t) => write!(f, "invgauss:{t}"),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "lebesgue" {
            return Ok(WeightSpec::Lebesgue);
        }
        let (kind, param) = s
            .split_once(':')
            .ok_or_else(|| invalid("weight", format!("expected lebesgue, power:L or invgauss:T, got `{s}`")))?;
        let v: f64 = param.trim().parse().map_err(|_| invalid("weight", format!("bad number `{param}`")))?;
        match kind.trim() {
            "power" => WeightSpec::Power(v).validate(),
            "invgauss" => WeightSpec::InvGauss(v).validate(),
            k => Err(invalid("weight", format!("unknown weight kind `{k}`"))),
        }
    }
}

/// `ln|e^a - e^b|`.
pub(crate) fn ln_abs_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return f64::NEG_INFINITY;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + log1mexp(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{make_bump_family, make_heavytail_family, make_shifted_gaussian};
    use std::f64::consts::PI;

    #[test]
    fn constant_density_maps_to_g() {
        let h = lsi_to_bhi_transform(&PiecewiseLogDensity::standard_gaussian());
        let g = OptimizerParams::standard();
        for &x in &[-2.0, 0.0, 0.4, 3.0] {
            assert!((h.ln_value(x) - g.ln_value(x)).abs() < 1e-14);
            assert!((h.ln_value(x) - ln_g(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn tilt_maps_to_translated_gaussian() {
        // exp((b y - b^2/2)/2) g(y / 2 sqrt(pi)) = G_{pi, b / 2 sqrt(pi)}
        for &b in &[-1.5, 0.7, 3.0] {
            let h = lsi_to_bhi_transform(&make_shifted_gaussian(b).unwrap());
            let g = OptimizerParams::new(PI, b / TWO_SQRT_PI).unwrap();
            for &x in &[-1.0, 0.0, 0.5, 2.0] {
                let (u, v) = (h.ln_value(x).exp(), g.ln_value(x).exp());
                assert!((u - v).abs() <= 1e-12 * v.max(1e-300), "b={b} x={x}");
            }
        }
    }

    #[test]
    fn optimizer_values() {
        let p = OptimizerParams::new(3.0, 1.0).unwrap();
        assert!((optimizer_eval(&p, 1.0).unwrap().to_f64() - (6.0 / PI).powf(0.25)).abs() < 1e-15);
        assert!(optimizer_eval(&OptimizerParams { a: -1.0, r: 0.0 }, 0.0).is_err());
        let w = p.support_half_width(1e-12).unwrap();
        assert!(w > 1.0 && w < 4.0);
    }

    #[test]
    fn tails_and_supports() {
        let h = lsi_to_bhi_transform(&make_bump_family(1.0, 0.5, 10.0).unwrap());
        assert_eq!(h.tail(), Tail::Gaussian(PI));
        let x = h.support_half_width(1e-12).unwrap();
        // the tilt mass sits near y = 2k
        assert!(x * TWO_SQRT_PI > 20.0 && x * TWO_SQRT_PI < 30.0);
        assert!(h.is_even());
        let env = lsi_to_bhi_transform(&make_heavytail_family(f64::INFINITY).unwrap());
        assert_eq!(env.tail(), Tail::Power(1.0));
        assert!(env.support_half_width(1e-12).is_err());
        let finite = lsi_to_bhi_transform(&make_heavytail_family(4.0).unwrap());
        assert_eq!(finite.tail(), Tail::Gaussian(PI));
    }

    #[test]
    fn weight_parsing() {
        assert_eq!("lebesgue".parse::<WeightSpec>().unwrap(), WeightSpec::Lebesgue);
        assert_eq!("power:1".parse::<WeightSpec>().unwrap(), WeightSpec::Power(1.0));
        assert_eq!("invgauss:0.5".parse::<WeightSpec>().unwrap(), WeightSpec::InvGauss(0.5));
        assert!("power:-1".parse::<WeightSpec>().is_err());
        assert!("cosine:1".parse::<WeightSpec>().is_err());
        assert_eq!(WeightSpec::InvGauss(1.0).to_string(), "invgauss:1");
    }

    #[test]
    fn integrability_threshold() {
        let w = WeightSpec::InvGauss(1.0);
        assert!(w.integrable(Tail::Gaussian(PI / 4.0 + 1e-9), 4.0));
        assert!(!w.integrable(Tail::Gaussian(PI / 4.0), 4.0));
        assert!(WeightSpec::Power(1.0).integrable(Tail::Power(1.0), 2.5));
        assert!(!WeightSpec::Power(1.0).integrable(Tail::Power(1.0), 2.0));
    }

    #[test]
    fn abs_diff_in_logs() {
        assert!((ln_abs_diff(2f64.ln(), 0.5f64.ln()) - 1.5f64.ln()).abs() < 1e-15);
        assert_eq!(ln_abs_diff(1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(ln_abs_diff(f64::NEG_INFINITY, 0.3), 0.3);
    }
}
