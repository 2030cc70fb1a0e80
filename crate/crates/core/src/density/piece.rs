//! Elementary pieces of a density relative to the Gaussian measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{inv_log_cdf, inv_log_sf, log_cdf, log_mass, log_pdf, log_sf, integrate_log, LogValue, QuadratureConfig};

/// Profile of the monotone transition between two levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BridgeShape {
    /// `u^3 (10 - 15u + 6u^2)`, twice continuously differentiable.
    #[default]
    Quintic,
    /// `u^2 (3 - 2u)`, continuously differentiable.
    Cubic,
    /// `psi(u) / (psi(u) + psi(1 - u))` with `psi(u) = exp(-1/u)`, smooth.
    Smooth,
}

impl BridgeShape {
    pub fn sigma(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            BridgeShape::Quintic => u * u * u * (10.0 - 15.0 * u + 6.0 * u * u),
            BridgeShape::Cubic => u * u * (3.0 - 2.0 * u),
            BridgeShape::Smooth => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    // 1 / (1 + exp(1/u - 1/(1-u)))
                    let z = 1.0 / u - 1.0 / (1.0 - u);
                    1.0 / (1.0 + z.exp())
                }
            }
        }
    }

    pub fn dsigma(self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            BridgeShape::Quintic => 30.0 * u * u * (1.0 - u) * (1.0 - u),
            BridgeShape::Cubic => 6.0 * u * (1.0 - u),
            BridgeShape::Smooth => {
                if u <= 0.0 || u >= 1.0 {
                    return 0.0;
                }
                let z = 1.0 / u - 1.0 / (1.0 - u);
                let dz = -1.0 / (u * u) - 1.0 / ((1.0 - u) * (1.0 - u));
                // sigma = 1/(1+e^z), sigma' = -e^z dz / (1+e^z)^2
                if z.abs() > 700.0 {
                    return 0.0;
                }
                let e = z.exp();
                -e * dz / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// `max_u sigma'(u)`.
    pub fn max_slope(self) -> f64 {
        match self {
            BridgeShape::Quintic => 15.0 / 8.0,
            BridgeShape::Cubic => 1.5,
            BridgeShape::Smooth => 2.0,
        }
    }
}

/// Monotone transition from `y0` at `x0` to `y1` at `x1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub shape: BridgeShape,
}

impl Bridge {
    fn u(&self, x: f64) -> f64 {
        (x - self.x0) / (self.x1 - self.x0)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.y1 + (self.y0 - self.y1) * (1.0 - self.shape.sigma(self.u(x)))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -(self.y0 - self.y1) * self.shape.dsigma(self.u(x)) / (self.x1 - self.x0)
    }

    /// Bound on `|L'|` over the bridge.
    pub fn slope_bound(&self) -> f64 {
        (self.y0 - self.y1).abs() * self.shape.max_slope() / (self.x1 - self.x0)
    }
}

/// One analytic piece of an unnormalized density `f~` relative to `gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Piece {
    /// `exp(log_value)`.
    Flat { log_value: f64 },
    Bridge(Bridge),
    /// `exp(log_r) * exp(b x - b^2 / 2)`.
    ExpTilt { log_r: f64, b: f64 },
    /// `exp(log_amplitude) * exp(x^2 / 2) / (1 + x^2)`.
    Rational { log_amplitude: f64 },
}

fn ln_sqrt_2pi() -> f64 {
    crate::gaussian::LN_SQRT_2PI
}

fn pos(l: f64) -> LogValue {
    LogValue::from_ln(l)
}

impl Piece {
    pub fn log_value(&self, x: f64) -> f64 {
        match self {
            Piece::Flat { log_value } => *log_value,
            Piece::Bridge(br) => br.value(x).ln(),
            Piece::ExpTilt { log_r, b } => log_r + b * x - 0.5 * b * b,
            Piece::Rational { log_amplitude } => log_amplitude + 0.5 * x * x - (x * x).ln_1p(),
        }
    }

    /// Derivative of `ln f~`.
    pub fn dlog(&self, x: f64) -> f64 {
        match self {
            Piece::Flat { .. } => 0.0,
            Piece::Bridge(br) => br.derivative(x) / br.value(x),
            Piece::ExpTilt { b, .. } => *b,
            Piece::Rational { .. } => x - 2.0 * x / (1.0 + x * x),
        }
    }

    /// `ln(f~(x) pdf(x))`, the log of the Lebesgue density.
    pub fn log_lebesgue(&self, x: f64) -> f64 {
        match self {
            Piece::ExpTilt { log_r, b } => log_r + log_pdf(x - b),
            Piece::Rational { log_amplitude } => log_amplitude - ln_sqrt_2pi() - (x * x).ln_1p(),
            _ => self.log_value(x) + log_pdf(x),
        }
    }

    /// `int_u^w f~ dgamma`.
    pub fn mass(&self, u: f64, w: f64, cfg: &QuadratureConfig) -> Result<LogValue> {
        if !(w > u) {
            return Ok(LogValue::ZERO);
        }
        Ok(match self {
            Piece::Flat { log_value } => log_mass(u, w).scale_ln(*log_value),
            Piece::ExpTilt { log_r, b } => log_mass(u - b, w - b).scale_ln(*log_r),
            Piece::Rational { log_amplitude } => {
                let d = w.atan() - u.atan();
                LogValue::from_f64(d).scale_ln(log_amplitude - ln_sqrt_2pi())
            }
            Piece::Bridge(_) => integrate_log(|x| pos(self.log_lebesgue(x)), u, w, cfg)?.value,
        })
    }

    /// Solve `mass(x, w) = target` for `x`; the caller guarantees a root in `[lo, w]`.
    pub fn solve_from_right(&self, lo: f64, w: f64, target: LogValue, cfg: &QuadratureConfig) -> Result<f64> {
        let x = match self {
            Piece::Flat { log_value } => {
                inv_log_sf((pos(log_sf(w)) + target.scale_ln(-log_value)).ln())
            }
            Piece::ExpTilt { log_r, b } => b + inv_log_sf((pos(log_sf(w - b)) + target.scale_ln(-log_r)).ln()),
            Piece::Rational { log_amplitude } => {
                let t = target.scale_ln(ln_sqrt_2pi() - log_amplitude).to_f64();
                (w.atan() - t).tan()
            }
            Piece::Bridge(_) => return self.solve_numeric(lo, w, target, true, cfg),
        };
        Ok(x.clamp(lo, w))
    }

    /// Solve `mass(u, x) = target` for `x`; the caller guarantees a root in `[u, hi]`.
    pub fn solve_from_left(&self, u: f64, hi: f64, target: LogValue, cfg: &QuadratureConfig) -> Result<f64> {
        let x = match self {
            Piece::Flat { log_value } => inv_log_cdf((pos(log_cdf(u)) + target.scale_ln(-log_value)).ln()),
            Piece::ExpTilt { log_r, b } => b + inv_log_cdf((pos(log_cdf(u - b)) + target.scale_ln(-log_r)).ln()),
            Piece::Rational { log_amplitude } => {
                let t = target.scale_ln(ln_sqrt_2pi() - log_amplitude).to_f64();
                (u.atan() + t).tan()
            }
            Piece::Bridge(_) => return self.solve_numeric(u, hi, target, false, cfg),
        };
        Ok(x.clamp(u, hi))
    }

    fn solve_numeric(&self, lo: f64, hi: f64, target: LogValue, from_right: bool, cfg: &QuadratureConfig) -> Result<f64> {
        let (mut a, mut b) = (lo, hi);
        let mut x = 0.5 * (a + b);
        let lt = target.ln();
        for _ in 0..100 {
            let m = if from_right { self.mass(x, hi, cfg)? } else { self.mass(lo, x, cfg)? };
            // residual and slope relative to the target, so tiny masses stay representable
            let g = if m.is_zero() { -1.0 } else { (m.ln() - lt).exp_m1() };
            let too_far_right = if from_right { g < 0.0 } else { g > 0.0 };
            if too_far_right {
                b = x;
            } else {
                a = x;
            }
            let dens = (self.log_lebesgue(x) - lt).exp();
            let slope = if from_right { -dens } else { dens };
            let mut nx = if slope != 0.0 { x - g / slope } else { f64::NAN };
            if !(nx > a && nx < b) {
                nx = 0.5 * (a + b);
            }
            if (nx - x).abs() <= 1e-15 * (1.0 + x.abs()) || b - a <= 1e-15 * (1.0 + x.abs()) {
                return Ok(nx);
            }
            x = nx;
        }
        Err(Error::RootNotFound(format!("bridge quantile for mass {target}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints_and_slopes() {
        for shape in [BridgeShape::Quintic, BridgeShape::Cubic, BridgeShape::Smooth] {
            assert_eq!(shape.sigma(0.0), 0.0);
            assert_eq!(shape.sigma(1.0), 1.0);
            assert!((shape.sigma(0.5) - 0.5).abs() < 1e-15);
            let peak = (0..=1000).map(|i| shape.dsigma(i as f64 / 1000.0)).fold(0.0, f64::max);
            assert!((peak - shape.max_slope()).abs() < 1e-4, "{shape:?}");
        }
    }

    #[test]
    fn smooth_derivative_matches_difference_quotient() {
        let s = BridgeShape::Smooth;
        for &u in &[0.1, 0.3, 0.5, 0.8] {
            let h = 1e-6;
            let fd = (s.sigma(u + h) - s.sigma(u - h)) / (2.0 * h);
            assert!((fd - s.dsigma(u)).abs() < 1e-8);
        }
    }

    #[test]
    fn tilt_solves_invert_mass() {
        let cfg = QuadratureConfig::default();
        let p = Piece::ExpTilt { log_r: -3.0, b: 12.0 };
        let m = p.mass(13.0, f64::INFINITY, &cfg).unwrap();
        let x = p.solve_from_right(6.0, f64::INFINITY, m, &cfg).unwrap();
        assert!((x - 13.0).abs() < 1e-12);
        let m = p.mass(6.0, 9.5, &cfg).unwrap();
        let x = p.solve_from_left(6.0, f64::INFINITY, m, &cfg).unwrap();
        assert!((x - 9.5).abs() < 1e-12);
    }

    #[test]
    fn bridge_solve_inverts_mass() {
        let cfg = QuadratureConfig::relative(1e-13);
        let br = Piece::Bridge(Bridge { x0: 4.9, x1: 5.0, y0: 1.0, y1: 0.02, shape: BridgeShape::Quintic });
        let m = br.mass(4.93, 5.0, &cfg).unwrap();
        let x = br.solve_from_right(4.9, 5.0, m, &cfg).unwrap();
        assert!((x - 4.93).abs() < 1e-11);
    }
}
