//! Fisher information, relative entropy, LSI deficit, moments and `L^p(gamma)`
//! distances to the constant `1`.
//!
//! Everything is assembled piece by piece: closed forms for flat and tilted
//! pieces, log-space quadrature for bridges and rational pieces.

use serde::{Deserialize, Serialize};

use crate::density::{Family, Piece, PiecewiseLogDensity, Segment, TensorizedMeasure};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{
    chi_moment, incomplete_moments, integrate_log, log1mexp, log_mass, log_pdf, LogValue, QuadratureConfig,
};
use crate::serde_ext::fmt17;

/// A moment that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tagged {
    Finite(f64),
    Divergent,
}

impl Tagged {
    pub fn finite(self) -> Option<f64> {
        match self {
            Tagged::Finite(x) => Some(x),
            Tagged::Divergent => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn cfg() -> QuadratureConfig {
    QuadratureConfig::relative(1e-12)
}

fn quad<F: Fn(f64) -> LogValue>(f: F, lo: f64, hi: f64) -> Result<(LogValue, f64)> {
    let r = integrate_log(f, lo, hi, &cfg())?;
    Ok((r.value, r.error.to_f64().abs()))
}

fn divergent(what: &str, seg: &Segment) -> Error {
    Error::Divergent(format!("{what} over the unbounded rational piece starting at {}", seg.lo))
}

/// `(int f~'^2 / f~ dgamma, error)` over one segment.
fn piece_fisher(seg: &Segment) -> Result<(LogValue, f64)> {
    let (lo, hi) = (seg.lo, seg.hi);
    match &seg.piece {
        Piece::Flat { .. } => Ok((LogValue::ZERO, 0.0)),
        Piece::ExpTilt { b, .. } => {
            let m = seg.piece.mass(lo, hi, &cfg())?;
            Ok((m.scale_ln(2.0 * b.abs().ln()), 0.0))
        }
        Piece::Rational { .. } if !hi.is_finite() => Err(divergent("Fisher information", seg)),
        p => quad(|x| LogValue::from_f64(p.dlog(x)).powf(2.0).scale_ln(p.log_lebesgue(x)), lo, hi),
    }
}

/// `(int f~ ln f~ dgamma, error)` over one segment.
fn piece_entropy(seg: &Segment) -> Result<(LogValue, f64)> {
    let (lo, hi) = (seg.lo, seg.hi);
    match &seg.piece {
        Piece::Flat { log_value } => Ok((log_mass(lo, hi).scale_ln(*log_value) * LogValue::from_f64(*log_value), 0.0)),
        Piece::ExpTilt { log_r, b } => {
            let m = seg.piece.mass(lo, hi, &cfg())?;
            let edge = |x: f64| if x.is_finite() { LogValue::from_ln(log_pdf(x - b)) } else { LogValue::ZERO };
            let head = m * LogValue::from_f64(log_r + 0.5 * b * b);
            let tail = (edge(lo) - edge(hi)).scale_ln(*log_r) * LogValue::from_f64(*b);
            Ok((head + tail, 0.0))
        }
        Piece::Rational { .. } if !hi.is_finite() => Err(divergent("relative entropy", seg)),
        p => quad(|x| LogValue::from_f64(p.log_value(x)).scale_ln(p.log_lebesgue(x)), lo, hi),
    }
}

fn sum_pieces<F>(f: &PiecewiseLogDensity, op: F) -> Result<(LogValue, f64)>
where
    F: Fn(&Segment) -> Result<(LogValue, f64)>,
{
    let mut vals = Vec::new();
    let mut err = 0.0;
    for (seg, mult) in f.half_segments() {
        let (v, e) = op(seg)?;
        vals.push(v * LogValue::from_f64(mult));
        err += mult * e;
    }
    Ok((LogValue::sum_slice(&vals), err))
}

pub fn fisher_info_estimate(f: &PiecewiseLogDensity) -> Result<Estimate> {
    let (v, e) = sum_pieces(f, piece_fisher)?;
    let c = f.log_scale().exp();
    Ok(Estimate { value: v.scale_ln(f.log_scale()).to_f64(), error: c * e })
}

/// `I(f) = int |f'|^2 / f dgamma`.
pub fn fisher_info(f: &PiecewiseLogDensity) -> Result<f64> {
    Ok(fisher_info_estimate(f)?.value)
}

pub fn rel_entropy_estimate(f: &PiecewiseLogDensity) -> Result<Estimate> {
    let (e, err) = sum_pieces(f, piece_entropy)?;
    // H = c E + ln c
    let v = e.scale_ln(f.log_scale()).to_f64() + f.log_scale();
    Ok(Estimate { value: v, error: f.log_scale().exp() * err + 1e-16 * v.abs() })
}

/// `H(f) = int f ln f dgamma`.
pub fn rel_entropy(f: &PiecewiseLogDensity) -> Result<f64> {
    Ok(rel_entropy_estimate(f)?.value)
}

fn ln_norm(f: &PiecewiseLogDensity) -> f64 {
    // ln N, computed as log1p of the departure from 1 when the family exposes it
    match f.family() {
        Family::Bump(p) => (2.0 * p.r + 2.0 * p.norm_excess.to_f64()).ln_1p(),
        _ => -f.log_scale(),
    }
}

pub fn lsi_deficit_estimate(f: &PiecewiseLogDensity) -> Result<Estimate> {
    // delta = c * sum(I/2 - E) + ln N, keeping the large tilt terms from cancelling
    let (d, err) = sum_pieces(f, |seg| {
        let (i, ei) = piece_fisher(seg)?;
        let (e, ee) = piece_entropy(seg)?;
        Ok((i.scale_ln(-std::f64::consts::LN_2) - e, 0.5 * ei + ee))
    })?;
    let v = d.scale_ln(f.log_scale()).to_f64() + ln_norm(f);
    Ok(Estimate { value: v, error: f.log_scale().exp() * err + 1e-16 * v.abs().max(1e-300) })
}

/// `delta(f) = I(f)/2 - H(f)`, non-negative by the log-Sobolev inequality.
pub fn lsi_deficit(f: &PiecewiseLogDensity) -> Result<f64> {
    Ok(lsi_deficit_estimate(f)?.value)
}

fn binomial(n: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `int_u^w |x|^p exp(log_r) pdf(x - b) dx` for `0 <= u < w`, `p` integer, `b >= 0`, `w = inf`.
fn tilt_moment_binomial_tail(p: u32, log_r: f64, b: f64, u: f64) -> LogValue {
    let m = incomplete_moments(p, u - b);
    let terms: Vec<LogValue> = (0..=p)
        .map(|j| {
            let bp = if p == j { LogValue::ONE } else { LogValue::from_f64(b).powf(f64::from(p - j)) };
            m[j as usize] * bp * LogValue::from_f64(binomial(p, j))
        })
        .collect();
    LogValue::sum_slice(&terms).scale_ln(log_r)
}

/// `int_lo^hi x^p exp(log_r) pdf(x - b) dx` for even integer `p`.
fn tilt_moment_even(p: u32, log_r: f64, b: f64, lo: f64, hi: f64) -> LogValue {
    let ml = incomplete_moments(p, lo - b);
    let mh = incomplete_moments(p, hi - b);
    let terms: Vec<LogValue> = (0..=p)
        .map(|j| {
            let bp = if p == j { LogValue::ONE } else { LogValue::from_f64(b.powi((p - j) as i32)) };
            (ml[j as usize] - mh[j as usize]) * bp * LogValue::from_f64(binomial(p, j))
        })
        .collect();
    LogValue::sum_slice(&terms).scale_ln(log_r)
}

fn tilt_moment(p: f64, log_r: f64, b: f64, lo: f64, hi: f64) -> Result<(LogValue, f64)> {
    let int_p = p.fract() == 0.0 && p <= 60.0;
    if int_p && (p as u32) % 2 == 0 {
        return Ok((tilt_moment_even(p as u32, log_r, b, lo, hi), 0.0));
    }
    let mut vals = Vec::new();
    let mut err = 0.0;
    // x >= 0 part, and the x <= 0 part reflected onto x >= 0 with tilt -b
    for (u, w, beta) in [(lo.max(0.0), hi, b), ((-hi).max(0.0), -lo, -b)] {
        if !(w > u) {
            continue;
        }
        if int_p && beta >= 0.0 && w == f64::INFINITY {
            vals.push(tilt_moment_binomial_tail(p as u32, log_r, beta, u));
        } else {
            let (v, e) = quad(|x| LogValue::from_ln(p * x.ln() + log_r + log_pdf(x - beta)), u, w)?;
            vals.push(v);
            err += e;
        }
    }
    Ok((LogValue::sum_slice(&vals), err))
}

fn piece_moment(seg: &Segment, p: f64) -> Result<Option<(LogValue, f64)>> {
    let (lo, hi) = (seg.lo, seg.hi);
    Ok(Some(match &seg.piece {
        Piece::Flat { log_value } => tilt_moment(p, *log_value, 0.0, lo, hi)?,
        Piece::ExpTilt { log_r, b } => tilt_moment(p, *log_r, *b, lo, hi)?,
        Piece::Rational { log_amplitude } => {
            if !hi.is_finite() {
                if p >= 1.0 {
                    return Ok(None);
                }
                // int_0^inf x^p / (1 + x^2) dx = pi / (2 cos(p pi / 2))
                if lo != 0.0 {
                    return Err(invalid("segments", "unbounded rational piece must start at 0"));
                }
                let total = std::f64::consts::PI / (2.0 * (0.5 * p * std::f64::consts::PI).cos());
                (LogValue::from_f64(total).scale_ln(log_amplitude - crate::gaussian::LN_SQRT_2PI), 0.0)
            } else {
                let pc = seg.piece.clone();
                quad(|x| LogValue::from_ln(p * x.abs().ln() + pc.log_lebesgue(x)), lo, hi)?
            }
        }
        Piece::Bridge(_) => {
            let pc = seg.piece.clone();
            quad(|x| LogValue::from_ln(p * x.abs().ln() + pc.log_lebesgue(x)), lo, hi)?
        }
    }))
}

pub fn moment_estimate(f: &PiecewiseLogDensity, p: f64) -> Result<(Tagged, f64)> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid("p", format!("moment order must be finite and > 0, got {p}")));
    }
    let mut vals = Vec::new();
    let mut err = 0.0;
    for (seg, mult) in f.half_segments() {
        match piece_moment(seg, p)? {
            None => return Ok((Tagged::Divergent, 0.0)),
            Some((v, e)) => {
                vals.push(v * LogValue::from_f64(mult));
                err += mult * e;
            }
        }
    }
    let c = f.log_scale();
    Ok((Tagged::Finite(LogValue::sum_slice(&vals).scale_ln(c).to_f64()), err * c.exp()))
}

/// `m_p(mu) = int |x|^p f dgamma`.
pub fn moment(f: &PiecewiseLogDensity, p: f64) -> Result<Tagged> {
    Ok(moment_estimate(f, p)?.0)
}

/// `ln |e^z - 1|`.
fn log_abs_expm1(z: f64) -> f64 {
    z.max(0.0) + log1mexp(z.abs())
}

fn bisect_root<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64) -> Option<f64> {
    let (ga, gb) = (g(a), g(b));
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return Some(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Points in `(lo, hi)` where `c f~ = 1`.
fn crossings(piece: &Piece, ls: f64, lo: f64, hi: f64) -> Vec<f64> {
    let z = |x: f64| ls + piece.log_value(x);
    let inside = |x: f64| x > lo && x < hi;
    let mut out = Vec::new();
    match piece {
        Piece::Flat { .. } => {}
        Piece::ExpTilt { log_r, b } => {
            if *b != 0.0 {
                let x = (0.5 * b * b - ls - log_r) / b;
                if inside(x) {
                    out.push(x);
                }
            }
        }
        Piece::Bridge(_) => {
            if let Some(x) = bisect_root(z, lo, hi) {
                if inside(x) {
                    out.push(x);
                }
            }
        }
        Piece::Rational { .. } => {
            // monotone on (-inf,-1], [-1,0], [0,1], [1,inf)
            let mut edges = vec![lo];
            edges.extend([-1.0, 0.0, 1.0].into_iter().filter(|e| inside(*e)));
            edges.push(hi);
            for w in edges.windows(2) {
                let (a, mut b) = (w[0].max(-1e8), w[1].min(1e8));
                if !b.is_finite() {
                    b = 1e8;
                }
                if let Some(x) = bisect_root(z, a, b) {
                    if inside(x) {
                        out.push(x);
                    }
                }
            }
        }
    }
    out
}

/// `(int |f - 1|^p dgamma, error)` over one segment, both as log values.
fn piece_lp(seg: &Segment, ls: f64, p: f64) -> Result<Option<(LogValue, LogValue)>> {
    let (lo, hi) = (seg.lo, seg.hi);
    let piece = &seg.piece;
    if let Piece::Flat { log_value } = piece {
        let d = LogValue::from_ln(log_abs_expm1(ls + log_value)).powf(p);
        return Ok(Some((d * log_mass(lo, hi), LogValue::ZERO)));
    }
    let is_rational = matches!(piece, Piece::Rational { .. });
    if is_rational && !hi.is_finite() && p > 1.0 {
        return Ok(None);
    }
    let mut edges = vec![lo];
    edges.extend(crossings(piece, ls, lo, hi));
    edges.push(hi);
    let closed = p == 1.0 && !matches!(piece, Piece::Bridge(_));
    let mut vals = Vec::new();
    let mut errs = Vec::new();
    for w in edges.windows(2) {
        let (u, v) = (w[0], w[1]);
        if closed {
            let m = piece.mass(u, v, &cfg())?.scale_ln(ls);
            vals.push((m - log_mass(u, v)).abs());
        } else {
            let r = integrate_log(|x| LogValue::from_ln(p * log_abs_expm1(ls + piece.log_value(x)) + log_pdf(x)), u, v, &cfg())?;
            vals.push(r.value);
            errs.push(r.error.abs());
        }
    }
    Ok(Some((LogValue::sum_slice(&vals), LogValue::sum_slice(&errs))))
}

/// `int |f - 1|^p dgamma` as a log value, `None` when infinite.
pub fn lp_integral(f: &PiecewiseLogDensity, p: f64) -> Result<(Option<LogValue>, f64)> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid("p", format!("exponent must be finite and > 0, got {p}")));
    }
    let ls = f.log_scale();
    let mut vals = Vec::new();
    let mut err = LogValue::ZERO;
    for (seg, mult) in f.half_segments() {
        match piece_lp(seg, ls, p)? {
            None => return Ok((None, 0.0)),
            Some((v, e)) => {
                vals.push(v * LogValue::from_f64(mult));
                err = err + e * LogValue::from_f64(mult);
            }
        }
    }
    let total = LogValue::sum_slice(&vals);
    let rel = if total.is_zero() { 0.0 } else { (err.ln() - total.ln()).exp() };
    Ok((Some(total), rel))
}

/// `||f - 1||_{L^p(gamma)}` as a log value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LpValue {
    Finite { norm: LogValue },
    Divergent,
}

impl LpValue {
    pub fn to_f64(self) -> f64 {
        match self {
            LpValue::Finite { norm } => norm.to_f64(),
            LpValue::Divergent => f64::INFINITY,
        }
    }

    pub fn ln(self) -> f64 {
        match self {
            LpValue::Finite { norm } => norm.ln(),
            LpValue::Divergent => f64::INFINITY,
        }
    }
}

pub fn lp_dist_to_one(f: &PiecewiseLogDensity, p: f64) -> Result<LpValue> {
    Ok(match lp_integral(f, p)?.0 {
        None => LpValue::Divergent,
        Some(v) => LpValue::Finite { norm: v.powf(1.0 / p) },
    })
}

/// Moment bounds for `mu x gamma_{n-1}` on `R^n`.
impl TensorizedMeasure {
    /// `(lower, upper)` bounds on `int |x|^p d(mu x gamma_{n-1})`; exact for `p = 2`.
    pub fn moment_bounds(&self, p: f64) -> Result<(f64, f64)> {
        let base = match moment(&self.base, p)? {
            Tagged::Finite(m) => m,
            Tagged::Divergent => return Ok((f64::INFINITY, f64::INFINITY)),
        };
        let n = self.dimension;
        if n == 1 {
            return Ok((base, base));
        }
        let chi = chi_moment(n - 1, p)?;
        if p == 2.0 {
            let exact = base + (n - 1) as f64;
            return Ok((exact, exact));
        }
        let lower = (2f64.powf(1.0 - p) * base - chi).max(base).max(chi);
        let upper = if p >= 1.0 {
            (base.powf(1.0 / p) + chi.powf(1.0 / p)).powf(p)
        } else {
            base + chi
        };
        Ok((lower, upper))
    }
}

/// `int sqrt(f) dgamma`.
pub fn sqrt_affinity(f: &PiecewiseLogDensity) -> Result<f64> {
    let half = 0.5 * f.log_scale();
    let mut vals = Vec::new();
    for (seg, mult) in f.half_segments() {
        let (lo, hi) = (seg.lo, seg.hi);
        let v = match &seg.piece {
            Piece::Flat { log_value } => log_mass(lo, hi).scale_ln(0.5 * log_value),
            // sqrt(r e^{bx - b^2/2}) = sqrt(r) e^{-b^2/8} e^{(b/2)x - (b/2)^2/2}
            Piece::ExpTilt { log_r, b } => {
                Piece::ExpTilt { log_r: 0.5 * log_r - b * b / 8.0, b: 0.5 * b }.mass(lo, hi, &cfg())?
            }
            p => quad(|x| LogValue::from_ln(0.5 * p.log_value(x) + log_pdf(x)), lo, hi)?.0,
        };
        vals.push(v.scale_ln(half) * LogValue::from_f64(mult));
    }
    Ok(LogValue::sum_slice(&vals).to_f64())
}

/// One side of an inequality evaluated numerically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        InequalityCheck { lhs, rhs, holds: lhs <= rhs + slack }
    }
}

/// `||f - 1||_{L^1(gamma)} <= sqrt(2 H(f))`.
pub fn pinsker_check(f: &PiecewiseLogDensity) -> Result<InequalityCheck> {
    let l1 = lp_dist_to_one(f, 1.0)?.to_f64();
    let h = rel_entropy(f)?;
    Ok(InequalityCheck::new(l1, (2.0 * h.max(0.0)).sqrt(), 1e-9))
}

/// `H(f) <= 2/(p-1) ||f - 1||_p^p + 2 ||f - 1||_p`, from `z ln z <= 2/(p-1)|z-1|^p + 2|z-1|`.
pub fn entropy_lp_bound_check(f: &PiecewiseLogDensity, p: f64) -> Result<InequalityCheck> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("needs p > 1, got {p}")));
    }
    let h = rel_entropy(f)?;
    let rhs = match lp_integral(f, p)?.0 {
        None => f64::INFINITY,
        Some(pp) => 2.0 / (p - 1.0) * pp.to_f64() + 2.0 * pp.powf(1.0 / p).to_f64(),
    };
    Ok(InequalityCheck::new(h, rhs, 1e-9))
}

/// `delta(f)` against `||sqrt f - 1||_2^2 / 2 = 1 - int sqrt f dgamma`.
///
/// The lower bound `delta >= ||sqrt f - 1||^2 / 2` is known only for a restricted class,
/// so `holds` is informational.
pub fn l1_stability_report(f: &PiecewiseLogDensity) -> Result<InequalityCheck> {
    let rhs = lsi_deficit(f)?;
    let lhs = 1.0 - sqrt_affinity(f)?;
    Ok(InequalityCheck::new(lhs, rhs, 1e-12))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub p: f64,
    pub value: Tagged,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpEntry {
    pub p: f64,
    pub value: LpValue,
    /// Relative error of `int |f - 1|^p dgamma`.
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub label: String,
    pub family: Family,
    pub fisher_info: Estimate,
    pub rel_entropy: Estimate,
    pub lsi_deficit: Estimate,
    pub moments: Vec<MomentEntry>,
    pub lp_dist: Vec<LpEntry>,
}

fn merged(base: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = base.iter().chain(extra).copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Every functional of `f`; moments always include `p = 1, 2` and distances `p = 1`.
pub fn compute_report(f: &PiecewiseLogDensity, ps: &[f64]) -> Result<FunctionalReport> {
    let mut moments = Vec::new();
    for p in merged(&[1.0, 2.0], ps) {
        let (value, error) = moment_estimate(f, p)?;
        moments.push(MomentEntry { p, value, error });
    }
    let mut lp_dist = Vec::new();
    for p in merged(&[1.0], ps) {
        let (v, rel_error) = lp_integral(f, p)?;
        let value = match v {
            None => LpValue::Divergent,
            Some(v) => LpValue::Finite { norm: v.powf(1.0 / p) },
        };
        lp_dist.push(LpEntry { p, value, rel_error });
    }
    Ok(FunctionalReport {
        label: f.label().to_string(),
        family: f.family().clone(),
        fisher_info: fisher_info_estimate(f)?,
        rel_entropy: rel_entropy_estimate(f)?,
        lsi_deficit: lsi_deficit_estimate(f)?,
        moments,
        lp_dist,
    })
}

/// A report lifted to `mu x gamma_{n-1}` on `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorizedReport {
    pub dimension: usize,
    pub base: FunctionalReport,
    /// `(p, lower, upper)` brackets on the radial moments; exact for `p = 2`.
    pub moment_bounds: Vec<(f64, f64, f64)>,
}

impl TensorizedReport {
    pub fn fisher_info(&self) -> f64 {
        self.base.fisher_info.value
    }

    pub fn rel_entropy(&self) -> f64 {
        self.base.rel_entropy.value
    }

    pub fn lsi_deficit(&self) -> f64 {
        self.base.lsi_deficit.value
    }

    pub fn moment(&self, p: f64) -> Option<(f64, f64)> {
        self.moment_bounds.iter().find(|m| m.0 == p).map(|m| (m.1, m.2))
    }
}

/// I, H and delta are unchanged; `m_2` shifts by `n - 1`; other moments are bracketed.
pub fn tensorize_report(report: &FunctionalReport, n: usize) -> Result<TensorizedReport> {
    if n == 0 {
        return Err(invalid("n", "dimension must be at least 1"));
    }
    let mut bounds = Vec::new();
    for m in &report.moments {
        let p = m.p;
        let base = m.value.to_f64();
        let b = if n == 1 || !base.is_finite() {
            (base, base)
        } else if p == 2.0 {
            (base + (n - 1) as f64, base + (n - 1) as f64)
        } else {
            let chi = chi_moment(n - 1, p)?;
            let lower = (2f64.powf(1.0 - p) * base - chi).max(base).max(chi);
            let upper = if p >= 1.0 { (base.powf(1.0 / p) + chi.powf(1.0 / p)).powf(p) } else { base + chi };
            (lower, upper)
        };
        bounds.push((p, b.0, b.1));
    }
    Ok(TensorizedReport { dimension: n, base: report.clone(), moment_bounds: bounds })
}

fn fmt_p(p: f64) -> String {
    format!("{p}")
}

fn key_fields(family: &Family) -> [String; 3] {
    match family {
        Family::Bump(b) => [fmt17(b.s), fmt17(b.t), fmt17(b.k)],
        Family::HeavyTail(h) => [String::new(), String::new(), fmt17(h.k)],
        _ => [String::new(), String::new(), String::new()],
    }
}

impl FunctionalReport {
    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = ["measure", "s", "t", "k", "I", "H", "delta"].iter().map(|s| s.to_string()).collect();
        cols.extend(self.moments.iter().map(|m| format!("m{}", fmt_p(m.p))));
        cols.extend(self.lp_dist.iter().map(|m| format!("l{}", fmt_p(m.p))));
        cols.extend(["err_I", "err_H", "err_delta"].iter().map(|s| s.to_string()));
        cols.extend(self.moments.iter().map(|m| format!("err_m{}", fmt_p(m.p))));
        cols.extend(self.lp_dist.iter().map(|m| format!("err_l{}", fmt_p(m.p))));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.label.replace(',', ";")];
        cols.extend(key_fields(&self.family));
        cols.push(fmt17(self.fisher_info.value));
        cols.push(fmt17(self.rel_entropy.value));
        cols.push(fmt17(self.lsi_deficit.value));
        cols.extend(self.moments.iter().map(|m| fmt17(m.value.to_f64())));
        cols.extend(self.lp_dist.iter().map(|m| fmt17(m.value.to_f64())));
        cols.push(fmt17(self.fisher_info.error));
        cols.push(fmt17(self.rel_entropy.error));
        cols.push(fmt17(self.lsi_deficit.error));
        cols.extend(self.moments.iter().map(|m| fmt17(m.error)));
        cols.extend(self.lp_dist.iter().map(|m| fmt17(m.rel_error)));
        cols.join(",")
    }

    pub fn moment(&self, p: f64) -> Option<Tagged> {
        self.moments.iter().find(|m| m.p == p).map(|m| m.value)
    }

    pub fn lp(&self, p: f64) -> Option<LpValue> {
        self.lp_dist.iter().find(|m| m.p == p).map(|m| m.value)
    }
}
