//! Standard Gaussian measure: densities, tails, quantiles, moments, quadrature.

mod logvalue;
pub mod quadrature;

pub use logvalue::{log1mexp, log1pexp, logaddexp, LogValue};
pub use quadrature::{integrate_gauss, integrate_log, integrate_log_split, Integral, LogIntegral, QuadratureConfig};

use crate::error::{invalid, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const LN_2: f64 = std::f64::consts::LN_2;

const CF_SWITCH: f64 = 8.0;
const CF_TERMS: usize = 80;

pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn pdf(x: f64) -> f64 {
    log_pdf(x).exp()
}

/// Mills ratio `Q(x) / pdf(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x >= CF_SWITCH {
        mills_cf(x)
    } else {
        (log_sf(x) - log_pdf(x)).exp()
    }
}

fn mills_cf(x: f64) -> f64 {
    let mut t = x;
    for j in (1..=CF_TERMS).rev() {
        t = x + j as f64 / t;
    }
    1.0 / t
}

/// `ln Q(x)` where `Q(x) = P(Z > x)`.
pub fn log_sf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > CF_SWITCH {
        log_pdf(x) + mills_cf(x).ln()
    } else if x >= -1.0 {
        (0.5 * libm::erfc(x / std::f64::consts::SQRT_2)).ln()
    } else {
        (-log_sf(-x).exp()).ln_1p()
    }
}

/// `ln Phi(x)`.
pub fn log_cdf(x: f64) -> f64 {
    log_sf(-x)
}

pub fn sf(x: f64) -> f64 {
    if (-1.0..=CF_SWITCH).contains(&x) {
        0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
    } else {
        log_sf(x).exp()
    }
}

pub fn cdf(x: f64) -> f64 {
    sf(-x)
}

/// Solve `ln Q(x) = lq` for `lq < 0`.
pub fn inv_log_sf(lq: f64) -> f64 {
    if lq.is_nan() || lq > 0.0 {
        return f64::NAN;
    }
    if lq == 0.0 {
        return f64::NEG_INFINITY;
    }
    if lq == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let half = -LN_2;
    if lq > half {
        return -inv_log_sf(log1mexp(-lq));
    }
    if lq == half {
        return 0.0;
    }
    let t = (-2.0 * lq).sqrt();
    let mut x = t
        - (2.515517 + 0.802853 * t + 0.010328 * t * t)
            / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    for _ in 0..60 {
        let step = (log_sf(x) - lq) * mills_ratio(x);
        x += step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Solve `ln Phi(x) = lp`.
pub fn inv_log_cdf(lp: f64) -> f64 {
    -inv_log_sf(lp)
}

pub fn quantile(u: f64) -> f64 {
    if u < 0.5 {
        inv_log_cdf(u.ln())
    } else {
        inv_log_sf((-u).ln_1p())
    }
}

/// Gaussian mass of `[a, b]` as a log value.
pub fn log_mass(a: f64, b: f64) -> LogValue {
    if !(b > a) {
        return LogValue::ZERO;
    }
    if a >= 0.0 {
        LogValue::from_ln(log_sf(a)) - LogValue::from_ln(log_sf(b))
    } else if b <= 0.0 {
        LogValue::from_ln(log_sf(-b)) - LogValue::from_ln(log_sf(-a))
    } else {
        LogValue::ONE - (LogValue::from_ln(log_sf(b)) + LogValue::from_ln(log_sf(-a)))
    }
}

/// `E|Z|^p` for `p > -1`.
pub fn gaussian_moment(p: f64) -> Result<f64> {
    if !(p > -1.0) {
        return Err(invalid("p", format!("absolute moment needs p > -1, got {p}")));
    }
    if p == 0.0 {
        return Ok(1.0);
    }
    Ok((0.5 * p * LN_2 + libm::lgamma(0.5 * (p + 1.0)) - 0.5 * std::f64::consts::PI.ln()).exp())
}

/// `E|X|^p` for `X ~ N(0, I_m)`.
pub fn chi_moment(m: usize, p: f64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("dimension", "must be at least 1"));
    }
    let mf = m as f64;
    if !(p > -mf) {
        return Err(invalid("p", format!("chi moment needs p > -{m}, got {p}")));
    }
    Ok((0.5 * p * LN_2 + libm::lgamma(0.5 * (mf + p)) - libm::lgamma(0.5 * mf)).exp())
}

/// `int_a^inf x^p dgamma(x)` for integer `p`.
pub fn incomplete_gaussian_moment(p: u32, a: f64) -> LogValue {
    incomplete_moments(p, a)[p as usize]
}

/// All of `M_0(a), ..., M_p(a)`.
pub fn incomplete_moments(p: u32, a: f64) -> Vec<LogValue> {
    let n = p as usize + 1;
    let mut m = vec![LogValue::ZERO; n];
    if a == f64::INFINITY {
        return m;
    }
    let lpdf = if a == f64::NEG_INFINITY { f64::NEG_INFINITY } else { log_pdf(a) };
    m[0] = LogValue::from_ln(log_sf(a));
    if n > 1 {
        m[1] = LogValue::from_ln(lpdf);
    }
    for j in 2..n {
        let head = if lpdf == f64::NEG_INFINITY {
            LogValue::ZERO
        } else {
            LogValue::from_f64(a).powf((j - 1) as f64).scale_ln(lpdf)
                * LogValue::from_f64(if a < 0.0 && (j - 1) % 2 == 1 { -1.0 } else { 1.0 })
        };
        m[j] = head + m[j - 2] * LogValue::from_f64((j - 1) as f64);
    }
    m
}
