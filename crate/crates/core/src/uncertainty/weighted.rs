//! Weighted `L^p` norms and distances to the Gaussian family, in log space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ln_abs_diff, OptimizerParams, Profile, Tail, WeightSpec};
use crate::error::{invalid, Error, Result};
use crate::functionals::LpValue;
use crate::gaussian::{gaussian_moment, integrate_log_split, log_mass, LogValue, QuadratureConfig, LN_2, LN_SQRT_2PI};

/// Quadrature used by the weighted norms: relative only, so tiny norms keep their digits.
pub fn default_norm_config() -> QuadratureConfig {
    QuadratureConfig::relative(1e-10)
}

/// `|phi - psi|` as a profile; sign changes become breakpoints.
pub struct Difference<'a> {
    a: &'a dyn Profile,
    b: &'a dyn Profile,
    crossings: Vec<f64>,
}

impl<'a> Difference<'a> {
    pub fn new(a: &'a dyn Profile, b: &'a dyn Profile) -> Result<Self> {
        let x = 1.5 * a.support_half_width(1e-16)?.max(b.support_half_width(1e-16)?);
        let even = a.is_even() && b.is_even();
        let lo = if even { 0.0 } else { -x };
        let m = 2048;
        let gap = |t: f64| a.ln_value(t) - b.ln_value(t);
        let mut crossings = Vec::new();
        let mut prev = (lo, gap(lo));
        for i in 1..=m {
            let t = lo + (x - lo) * i as f64 / m as f64;
            let d = gap(t);
            if prev.1.is_finite() && d.is_finite() && prev.1 * d < 0.0 {
                let (mut l, mut r) = (prev.0, t);
                for _ in 0..80 {
                    let mid = 0.5 * (l + r);
                    if gap(mid) * prev.1 > 0.0 {
                        l = mid;
                    } else {
                        r = mid;
                    }
                }
                let c = 0.5 * (l + r);
                crossings.push(c);
                if even && c > 0.0 {
                    crossings.push(-c);
                }
            }
            prev = (t, d);
        }
        crossings.sort_by(|u, v| u.partial_cmp(v).unwrap());
        Ok(Difference { a, b, crossings })
    }

    pub fn crossings(&self) -> &[f64] {
        &self.crossings
    }
}

impl Profile for Difference<'_> {
    fn ln_value(&self, x: f64) -> f64 {
        ln_abs_diff(self.a.ln_value(x), self.b.ln_value(x))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut v = self.a.breakpoints();
        v.extend(self.b.breakpoints());
        v.extend(&self.crossings);
        v.sort_by(|u, w| u.partial_cmp(w).unwrap());
        v.dedup();
        v
    }

    fn is_even(&self) -> bool {
        self.a.is_even() && self.b.is_even()
    }

    fn tail(&self) -> Tail {
        self.a.tail().slower(self.b.tail())
    }

    fn support_half_width(&self, tol: f64) -> Result<f64> {
        Ok(self.a.support_half_width(tol)?.max(self.b.support_half_width(tol)?))
    }
}

/// `int_0^inf phi(s x)^p w(s x) dx` for `s = +-1`.
fn half_line(phi: &dyn Profile, p: f64, w: WeightSpec, side: f64, cfg: &QuadratureConfig) -> Result<LogValue> {
    let ln_f = |x: f64| p * phi.ln_value(side * x) + w.ln_weight(side * x);
    let breaks: Vec<f64> = phi.breakpoints().into_iter().map(|b| side * b).filter(|b| *b > 0.0).collect();
    match phi.tail() {
        Tail::Gaussian(_) => Ok(integrate_log_split(|x| LogValue::from_ln(ln_f(x)), 0.0, f64::INFINITY, &breaks, cfg)?.value),
        Tail::Power(_) => {
            // x = e^u turns the algebraic tail into an exponential one
            let inner: Vec<f64> = breaks.iter().copied().filter(|b| *b < 1.0).collect();
            let outer: Vec<f64> = breaks.iter().filter(|b| **b > 1.0).map(|b| b.ln()).collect();
            let head = integrate_log_split(|x| LogValue::from_ln(ln_f(x)), 0.0, 1.0, &inner, cfg)?.value;
            let tail = integrate_log_split(|u| LogValue::from_ln(ln_f(u.exp()) + u), 0.0, f64::INFINITY, &outer, cfg)?.value;
            Ok(head + tail)
        }
    }
}

/// `||phi||_{L^p(w)}`, or divergent when the weight outgrows the profile.
pub fn weighted_lp_norm(phi: &dyn Profile, p: f64, w: WeightSpec) -> Result<LpValue> {
    weighted_lp_norm_with(phi, p, w, &default_norm_config())
}

pub fn weighted_lp_norm_with(phi: &dyn Profile, p: f64, w: WeightSpec, cfg: &QuadratureConfig) -> Result<LpValue> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid("p", format!("must be finite and > 0, got {p}")));
    }
    let w = w.validate()?;
    if !w.integrable(phi.tail(), p) {
        return Ok(LpValue::Divergent);
    }
    let right = half_line(phi, p, w, 1.0, cfg)?;
    let total = if phi.is_even() { right * LogValue::from_f64(2.0) } else { right + half_line(phi, p, w, -1.0, cfg)? };
    Ok(LpValue::Finite { norm: total.powf(1.0 / p) })
}

/// Closed forms of `||G_{a,r}||_{L^p(w)}`; power weights need `r = 0` unless `lambda = 0`.
pub fn optimizer_norm_closed_form(g: &OptimizerParams, p: f64, w: WeightSpec) -> Result<LpValue> {
    let g = OptimizerParams::new(g.a, g.r)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid("p", format!("must be finite and > 0, got {p}")));
    }
    let pi = std::f64::consts::PI;
    let (a, r) = (g.a, g.r);
    let lead = 0.25 * p * (2.0 * a / pi).ln();
    let lnpp = match w.validate()? {
        WeightSpec::InvGauss(t) => {
            let beta = a * p - t * pi;
            if beta <= 0.0 {
                return Ok(LpValue::Divergent);
            }
            lead - 0.25 * t * LN_2 + 0.5 * (pi / beta).ln() + a * p * r * r * t * pi / beta
        }
        w => {
            let l = w.param();
            if l != 0.0 && r != 0.0 {
                return Err(invalid("r", "power-weight closed form needs r = 0"));
            }
            lead - 0.5 * (l + 1.0) * (2.0 * a * p).ln() + LN_SQRT_2PI + gaussian_moment(l)?.ln()
        }
    };
    Ok(LpValue::Finite { norm: LogValue::from_ln(lnpp / p) })
}

/// `||G_a 1_{M(a,w)}||_{L^p(g^{-theta} dx)}` with `M(a,w) = {G_a >= w G_pi} = [-x0, x0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNorm {
    pub x0: f64,
    pub quadrature: LogValue,
    pub closed_form: LogValue,
}

pub fn truncated_optimizer_norm(a: f64, level: f64, p: f64, theta: f64) -> Result<TruncatedNorm> {
    let pi = std::f64::consts::PI;
    if !(a > pi && a.is_finite()) {
        return Err(invalid("a", format!("must exceed pi, got {a}")));
    }
    if !(level > 0.0 && level < (a / pi).powf(0.25)) {
        return Err(invalid("level", format!("must lie in (0, (a/pi)^(1/4)), got {level}")));
    }
    if !(p > theta && theta >= 0.0) {
        return Err(invalid("p", format!("need p > theta >= 0, got p={p} theta={theta}")));
    }
    let x0 = 0.5 * ((a.ln() - pi.ln() - 4.0 * level.ln()) / (a - pi)).sqrt();
    let g = OptimizerParams::new(a, 0.0)?;
    let w = WeightSpec::InvGauss(theta);
    let q = integrate_log_split(|x| LogValue::from_ln(p * g.ln_value(x) + w.ln_weight(x)), -x0, x0, &[0.0], &default_norm_config())?;
    // (2a/pi)^{p/4} 2^{-theta/4} int_{-x0}^{x0} e^{-beta x^2} dx
    let beta = a * p - theta * pi;
    let s = (2.0 * beta).sqrt();
    let lnpp = 0.25 * p * (2.0 * a / pi).ln() - 0.25 * theta * LN_2 + 0.5 * (pi / beta).ln()
        + log_mass(-s * x0, s * x0).ln();
    Ok(TruncatedNorm { x0, quadrature: q.value.powf(1.0 / p), closed_form: LogValue::from_ln(lnpp / p) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    /// `inf_{a,r} ||h - G_{a,r}||_{L^p(w)}`.
    pub distance: LogValue,
    pub a: f64,
    pub r: f64,
    pub h_norm: LogValue,
    /// `distance / ||h||`.
    pub ratio: f64,
    /// The minimum sat on the lower end of the search range.
    pub at_lower_bound: bool,
}

const A_MAX: f64 = 1e3 * std::f64::consts::PI;
const A_FLOOR: f64 = 1e-3 * std::f64::consts::PI;
const SCAN: usize = 41;

fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn ln_dist(h: &dyn Profile, g: &OptimizerParams, p: f64, w: WeightSpec, cfg: &QuadratureConfig) -> f64 {
    let d = match Difference::new(h, g) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    match weighted_lp_norm_with(&d, p, w, cfg) {
        Ok(v) => v.ln(),
        Err(_) => f64::INFINITY,
    }
}

/// Mean and spread of `h^2`, used to bracket translations.
fn center(h: &dyn Profile, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    let br = h.breakpoints();
    let m = |k: i32| -> Result<f64> {
        let v = integrate_log_split(
            |x| LogValue::from_f64(x.powi(k)).scale_ln(2.0 * h.ln_value(x)),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &br,
            cfg,
        )?;
        Ok(v.value.to_f64())
    };
    let (m0, m1, m2) = (m(0)?, m(1)?, m(2)?);
    let mean = m1 / m0;
    Ok((mean, (m2 / m0 - mean * mean).max(1e-12).sqrt()))
}

fn best_r(h: &dyn Profile, a: f64, p: f64, w: WeightSpec, (mean, sd): (f64, f64), cfg: &QuadratureConfig) -> (f64, f64) {
    let n = 13;
    let (lo, hi) = (mean - 4.0 * sd, mean + 4.0 * sd);
    let grid: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (r, ln_dist(h, &OptimizerParams { a, r }, p, w, cfg))
        })
        .collect();
    let i = (0..n).min_by(|x, y| grid[*x].1.partial_cmp(&grid[*y].1).unwrap()).unwrap();
    let (l, u) = (grid[i.saturating_sub(1)].0, grid[(i + 1).min(n - 1)].0);
    golden(|r| ln_dist(h, &OptimizerParams { a, r }, p, w, cfg), l, u, 1e-6 * sd)
}

/// `inf_{a > 0, r} ||h - G_{a,r}||_{L^p(w)}`; even profiles fix `r = 0`.
///
/// `a - a_min` is searched on a log grid up to `a = 1000 pi` and refined by golden section,
/// where `a_min = theta pi / p` for `dm_theta` (starting `1e-3 a_min` above it) and
/// `a_min = 0` otherwise (starting at `pi / 1000`). A minimum on the upper end is reported
/// as unbracketed.
pub fn dist_to_optimizers(h: &dyn Profile, p: f64, w: WeightSpec) -> Result<DistanceResult> {
    dist_to_optimizers_with(h, p, w, &default_norm_config())
}

pub fn dist_to_optimizers_with(h: &dyn Profile, p: f64, w: WeightSpec, cfg: &QuadratureConfig) -> Result<DistanceResult> {
    let w = w.validate()?;
    let h_norm = match weighted_lp_norm_with(h, p, w, cfg)? {
        LpValue::Finite { norm } => norm,
        LpValue::Divergent => return Err(Error::Divergent(format!("profile is not in L^{p}({w})"))),
    };
    let pi = std::f64::consts::PI;
    // search in u = ln(a - a_min) so the membership edge a_min = theta pi / p is resolved
    let a_min = match w {
        WeightSpec::InvGauss(t) if t > 0.0 => t * pi / p,
        _ => 0.0,
    };
    let lo = if a_min > 0.0 { a_min * 1e-3 } else { A_FLOOR };
    let (la, lb) = (lo.ln(), (A_MAX - a_min).ln());
    let even = h.is_even();
    let spread = if even { (0.0, 1.0) } else { center(h, cfg)? };
    let objective = |u: f64| -> (f64, f64) {
        let a = a_min + u.exp();
        if even {
            (0.0, ln_dist(h, &OptimizerParams { a, r: 0.0 }, p, w, cfg))
        } else {
            best_r(h, a, p, w, spread, cfg)
        }
    };
    let scan: Vec<(f64, (f64, f64))> = (0..SCAN)
        .into_par_iter()
        .map(|i| {
            let l = la + (lb - la) * i as f64 / (SCAN - 1) as f64;
            (l, objective(l))
        })
        .collect();
    let i = (0..SCAN).min_by(|x, y| scan[*x].1 .1.partial_cmp(&scan[*y].1 .1).unwrap()).unwrap();
    if !scan[i].1 .1.is_finite() && scan[i].1 .1 > 0.0 {
        return Err(Error::Divergent(format!("every candidate distance diverges in L^{p}({w})")));
    }
    if i == SCAN - 1 {
        return Err(Error::NoBracket(format!("distance still decreasing at a = {A_MAX}")));
    }
    let (u, r, ln_d, at_lower) = if i == 0 {
        let (r, d) = scan[0].1;
        (scan[0].0, r, d, true)
    } else {
        let (l, d) = golden(|x| objective(x).1, scan[i - 1].0, scan[i + 1].0, 1e-7);
        let (r, _) = objective(l);
        if d <= scan[i].1 .1 {
            (l, r, d, false)
        } else {
            (scan[i].0, scan[i].1 .0, scan[i].1 .1, false)
        }
    };
    Ok(DistanceResult {
        distance: LogValue::from_ln(ln_d),
        a: a_min + u.exp(),
        r,
        h_norm,
        ratio: (ln_d - h_norm.ln()).exp(),
        at_lower_bound: at_lower,
    })
}

/// `dist_{L^p(w)}(h, G) / ||h||_{L^p(w)}`.
pub fn normalized_distance_ratio(h: &dyn Profile, p: f64, w: WeightSpec) -> Result<f64> {
    Ok(dist_to_optimizers(h, p, w)?.ratio)
}
