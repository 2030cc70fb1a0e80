//! Least-squares fits of computed sequences against the Theorem 1 expansions,
//! plus finite-k trend verdicts for the instability results.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::density::{
    heavytail_constant, heavytail_infimum, make_bump_family, make_bump_family_with, make_heavytail_family,
    BridgeShape, PiecewiseLogDensity,
};
use crate::error::{invalid, Error, Result};
use crate::functionals::{fisher_info, lp_dist_to_one, lsi_deficit, moment, rel_entropy, Tagged};
use crate::gaussian::{gaussian_moment, QuadratureConfig};
use crate::transport::wasserstein_pp;
use crate::uncertainty::{
    bhi_deficit, dist_to_optimizers_with, lsi_to_bhi_transform, weighted_lp_norm_with, GridSpec, WeightSpec,
};

pub const DEFAULT_K_GRID: [f64; 9] = [5.0, 7.0, 10.0, 14.0, 20.0, 28.0, 40.0, 57.0, 80.0];

/// Expansion fits only use `k` at or above this; below it the bridge still shows in `delta`.
pub const FIT_K_MIN: f64 = 10.0;

/// Condition number above which a fit is flagged unreliable.
pub const MAX_CONDITION: f64 = 1e10;

/// `k^e`, optionally times `ln k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub exponent: f64,
    pub log: bool,
}

impl Basis {
    pub fn power(exponent: f64) -> Self {
        Basis { exponent, log: false }
    }

    pub fn power_log(exponent: f64) -> Self {
        Basis { exponent, log: true }
    }

    pub fn constant() -> Self {
        Basis::power(0.0)
    }

    pub fn eval(self, k: f64) -> f64 {
        let v = k.powf(self.exponent);
        if self.log {
            v * k.ln()
        } else {
            v
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.exponent == 0.0, self.log) {
            (true, false) => write!(f, "1"),
            (true, true) => write!(f, "log k"),
            (false, false) => write!(f, "k^{}", self.exponent),
            (false, true) => write!(f, "k^{} log k", self.exponent),
        }
    }
}

fn unique_basis(v: Vec<Basis>) -> Vec<Basis> {
    let mut out: Vec<Basis> = Vec::new();
    for b in v {
        if !out.iter().any(|o| o.log == b.log && (o.exponent - b.exponent).abs() < 1e-12) {
            out.push(b);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub basis: Vec<Basis>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// `residual_norm / ||values||`.
    pub relative_residual: f64,
    /// Of the column-equilibrated design matrix.
    pub condition_number: f64,
    pub reliable: bool,
}

impl ExpansionFit {
    pub fn coefficient(&self, b: Basis) -> Option<f64> {
        self.basis.iter().position(|x| *x == b).map(|i| self.coefficients[i])
    }

    pub fn predict(&self, k: f64) -> f64 {
        self.basis.iter().zip(&self.coefficients).map(|(b, c)| c * b.eval(k)).sum()
    }
}

/// Ordinary least squares of `value ~ sum_j c_j basis_j(k)` through the SVD.
pub fn fit_expansion(points: &[(f64, f64)], basis: &[Basis]) -> Result<ExpansionFit> {
    let (n, m) = (points.len(), basis.len());
    if m == 0 {
        return Err(invalid("basis", "empty"));
    }
    if n < m + 2 {
        return Err(invalid("points", format!("need at least {} points for {m} basis functions, got {n}", m + 2)));
    }
    if points.iter().any(|(k, v)| !(k.is_finite() && *k > 0.0 && v.is_finite())) {
        return Err(invalid("points", "k must be positive and values finite"));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid("points", "k must be strictly increasing"));
    }
    let mut a = DMatrix::from_fn(n, m, |i, j| basis[j].eval(points[i].0));
    let scale: Vec<f64> = (0..m).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::RankDeficient(scale));
    }
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), s| (hi.max(*s), lo.min(*s)));
    if smin <= 1e-14 * smax {
        return Err(Error::RankDeficient(sv));
    }
    let c = svd.solve(&y, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let residual_norm = (&a * &c - &y).norm();
    let yn = y.norm();
    let condition_number = smax / smin;
    Ok(ExpansionFit {
        basis: basis.to_vec(),
        coefficients: c.iter().zip(&scale).map(|(c, s)| c / s).collect(),
        residual_norm,
        relative_residual: if yn > 0.0 { residual_norm / yn } else { residual_norm },
        condition_number,
        reliable: condition_number <= MAX_CONDITION,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub predicted: f64,
    pub fitted: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl Claim {
    /// `|fitted - predicted| <= tolerance`.
    pub fn near(predicted: f64, fitted: f64, tolerance: f64) -> Self {
        Claim { predicted, fitted, tolerance, pass: (fitted - predicted).abs() <= tolerance, detail: None }
    }

    pub fn with(predicted: f64, fitted: f64, tolerance: f64, pass: bool, detail: impl Into<String>) -> Self {
        Claim { predicted, fitted, tolerance, pass, detail: Some(detail.into()) }
    }

    fn from_fit(fit: &ExpansionFit, b: Basis, predicted: f64, tolerance: f64) -> Self {
        let c = fit.coefficient(b).unwrap_or(f64::NAN);
        let mut claim = Claim::near(predicted, c, tolerance);
        if !fit.reliable {
            claim.pass = false;
            claim.detail = Some(format!("unreliable fit, condition number {:e}", fit.condition_number));
        } else {
            claim.detail = Some(format!("coefficient of {b}, relative residual {:e}", fit.relative_residual));
        }
        claim
    }
}

/// `{theorem, params, per_claim}`; `series` carries the raw sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub theorem: String,
    pub params: BTreeMap<String, Value>,
    pub per_claim: BTreeMap<String, Claim>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub series: Vec<SeriesPoint>,
}

impl Verdict {
    fn new(theorem: &str, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        Verdict { theorem: theorem.into(), params, per_claim: BTreeMap::new(), series: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.per_claim.values().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.per_claim.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub p: f64,
    pub value: f64,
}

/// Functionals of one bump measure; extra entries only when requested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub k: f64,
    pub fisher_info: f64,
    pub rel_entropy: f64,
    pub lsi_deficit: f64,
    pub w2_sq: Option<f64>,
    pub talagrand_deficit: Option<f64>,
    pub moments: Vec<PValue>,
    pub wasserstein: Vec<PValue>,
    /// `ln ||f - 1||_{L^p(dgamma)}`; the norm itself overflows for large `k`.
    pub ln_lp_dist: Vec<PValue>,
}

impl SeriesPoint {
    pub fn moment(&self, p: f64) -> Option<f64> {
        self.moments.iter().find(|v| v.p == p).map(|v| v.value)
    }

    pub fn wasserstein(&self, p: f64) -> Option<f64> {
        self.wasserstein.iter().find(|v| v.p == p).map(|v| v.value)
    }

    pub fn ln_lp_dist(&self, p: f64) -> Option<f64> {
        self.ln_lp_dist.iter().find(|v| v.p == p).map(|v| v.value)
    }
}

/// What to compute along a bump sequence besides `I`, `H` and `delta`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesRequest {
    pub w2: bool,
    pub moments: Vec<f64>,
    /// `W_p` orders.
    pub wasserstein: Vec<f64>,
    /// `||f - 1||_{L^p(dgamma)}` orders.
    pub lp_dist: Vec<f64>,
    pub bridge: BridgeShape,
}

fn series_point(f: &PiecewiseLogDensity, k: f64, req: &SeriesRequest) -> Result<SeriesPoint> {
    let gamma = PiecewiseLogDensity::standard_gaussian();
    let h = rel_entropy(f)?;
    let w2_sq = if req.w2 { Some(wasserstein_pp(f, &gamma, 2.0)?.to_f64()) } else { None };
    let moments = req
        .moments
        .iter()
        .map(|&p| Ok(PValue { p, value: moment(f, p)?.to_f64() }))
        .collect::<Result<Vec<_>>>()?;
    let wasserstein = req
        .wasserstein
        .iter()
        .map(|&p| Ok(PValue { p, value: wasserstein_pp(f, &gamma, p)?.powf(1.0 / p).to_f64() }))
        .collect::<Result<Vec<_>>>()?;
    let ln_lp_dist =
        req.lp_dist.iter().map(|&p| Ok(PValue { p, value: lp_dist_to_one(f, p)?.ln() })).collect::<Result<Vec<_>>>()?;
    Ok(SeriesPoint {
        k,
        fisher_info: fisher_info(f)?,
        rel_entropy: h,
        lsi_deficit: lsi_deficit(f)?,
        w2_sq,
        talagrand_deficit: w2_sq.map(|w| 2.0 * h - w),
        moments,
        wasserstein,
        ln_lp_dist,
    })
}

/// The bump sequence `f_k(s, t)` over `ks`, computed in parallel and returned in `ks` order.
pub fn bump_series(s: f64, t: f64, ks: &[f64], req: &SeriesRequest) -> Result<Vec<SeriesPoint>> {
    check_grid(ks)?;
    ks.par_iter()
        .map(|&k| {
            let f = make_bump_family_with(s, t, k, req.bridge)?;
            series_point(&f, k, req)
        })
        .collect()
}

fn check_grid(ks: &[f64]) -> Result<()> {
    if ks.is_empty() {
        return Err(invalid("k", "empty grid"));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("k", "grid must be strictly increasing"));
    }
    Ok(())
}

/// Last three values move monotonically toward `target`.
pub fn approaches(values: &[f64], target: f64) -> bool {
    let n = values.len();
    n >= 3 && {
        let d: Vec<f64> = values[n - 3..].iter().map(|v| (v - target).abs()).collect();
        d[0] >= d[1] && d[1] >= d[2]
    }
}

/// Last three values strictly decreasing.
pub fn decreasing_tail(values: &[f64]) -> bool {
    let n = values.len();
    n >= 3 && values[n - 3] > values[n - 2] && values[n - 2] > values[n - 1]
}

/// Items 1 to 5 of Theorem 1 for the sequence `f_k(s, t)`.
///
/// Item 5 is a two-sided band on `(m_p(mu_k) - m_p(gamma)) / (s k^{p-t})` over `k >= 10`.
pub fn verify_theorem1(s: f64, t: f64, ks: &[f64], ps: &[f64]) -> Result<Verdict> {
    check_grid(ks)?;
    let mut moments = vec![2.0];
    moments.extend(ps.iter().copied().filter(|p| *p != 2.0));
    let req = SeriesRequest { w2: true, moments, ..Default::default() };
    let series = bump_series(s, t, ks, &req)?;
    let mut v = Verdict::new("theorem1", json!({ "s": s, "t": t, "k": ks, "p": ps, "fit_k_min": FIT_K_MIN }));
    let fit_from = if series.iter().filter(|x| x.k >= FIT_K_MIN).count() >= 6 { FIT_K_MIN } else { 0.0 };
    let pts = |f: &dyn Fn(&SeriesPoint) -> f64| -> Vec<(f64, f64)> {
        series.iter().filter(|x| x.k >= fit_from).map(|x| (x.k, f(x))).collect()
    };

    let (lead, logb, decay) = (Basis::power(2.0 - t), Basis::power_log(-t), Basis::power(-t));
    let fit = fit_expansion(&pts(&|x| x.lsi_deficit), &[logb, decay])?;
    v.per_claim.insert("item1_delta_log_coefficient".into(), Claim::from_fit(&fit, logb, s * t / 2.0, 0.03 * s * t / 2.0));
    let second = 0.5 * s * (4.0 * std::f64::consts::E / s).ln();
    v.per_claim.insert("item1_delta_power_coefficient".into(), Claim::from_fit(&fit, decay, second, 0.05 * second.abs()));

    let smooth = bump_series(s, t, ks, &SeriesRequest { bridge: BridgeShape::Smooth, ..Default::default() })?;
    let alt_pts: Vec<(f64, f64)> = smooth.iter().filter(|x| x.k >= fit_from).map(|x| (x.k, x.lsi_deficit)).collect();
    let alt = fit_expansion(&alt_pts, &[logb, decay])?;
    let shift = fit.coefficients.iter().zip(&alt.coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    v.per_claim.insert(
        "bridge_shape_sensitivity".into(),
        Claim::with(0.0, shift, fit.residual_norm, shift <= fit.residual_norm, "max coefficient change, smooth vs quintic bridge"),
    );

    let kmax = *ks.last().unwrap();
    let h_basis = unique_basis(vec![lead, Basis::power(2.0 - 2.0 * t), logb, decay]);
    let h_fit = fit_expansion(&pts(&|x| x.rel_entropy), &h_basis)?;
    v.per_claim.insert("item2_entropy_leading".into(), Claim::from_fit(&h_fit, lead, s, 5e-3 * s));
    if h_basis.len() < 4 {
        v.per_claim.insert("item2_entropy_log_coefficient".into(), Claim::from_fit(&h_fit, logb, -s * t / 2.0, 0.03 * s * t / 2.0));
    }

    let w2: Vec<f64> = series.iter().map(|x| x.w2_sq.unwrap() / x.k.powf(2.0 - t)).collect();
    let last = *w2.last().unwrap();
    let w2_pass = (last - 2.0 * s).abs() <= 0.2 * s && approaches(&w2, 2.0 * s);
    v.per_claim.insert(
        "item3_w2_squared".into(),
        Claim::with(2.0 * s, last, 0.2 * s, w2_pass, format!("W2^2 / k^(2-t) at k = {kmax}, last three approach 2s")),
    );

    let m_basis = unique_basis(vec![lead, Basis::power(2.0 - 2.0 * t), decay]);
    let m_fit = fit_expansion(&pts(&|x| x.moment(2.0).unwrap() - 1.0), &m_basis)?;
    v.per_claim.insert("item4_second_moment_leading".into(), Claim::from_fit(&m_fit, lead, 2.0 * s, 5e-3 * 2.0 * s));

    let eps = 0.1;
    for &p in ps {
        let mg = gaussian_moment(p)?;
        let ratios: Vec<f64> = series
            .iter()
            .filter(|x| x.k >= 10.0)
            .map(|x| (x.moment(p).unwrap() - mg) / (s * x.k.powf(p - t)))
            .collect();
        if ratios.is_empty() {
            continue;
        }
        let hi = 4f64.powf(p - 1.0);
        let lo_seen = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_seen = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pass = lo_seen >= 1.0 - eps && hi_seen <= hi + eps;
        v.per_claim.insert(
            format!("item5_moment_p{p}"),
            Claim::with(1.0, lo_seen, eps, pass, format!("ratios over k >= 10 in [{lo_seen}, {hi_seen}], band [1, {hi}]")),
        );
    }
    v.series = series;
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstabilityTheorem {
    LsiW2,
    LsiW1,
    TalW2,
    TalW1,
}

impl InstabilityTheorem {
    pub const ALL: [InstabilityTheorem; 4] =
        [InstabilityTheorem::LsiW2, InstabilityTheorem::LsiW1, InstabilityTheorem::TalW2, InstabilityTheorem::TalW1];

    pub fn id(self) -> &'static str {
        match self {
            InstabilityTheorem::LsiW2 => "lsi-w2",
            InstabilityTheorem::LsiW1 => "lsi-w1",
            InstabilityTheorem::TalW2 => "tal-w2",
            InstabilityTheorem::TalW1 => "tal-w1",
        }
    }

    /// `(s, t)` used by the proof.
    pub fn bump_params(self, m: f64, p: f64) -> Result<(f64, f64)> {
        match self {
            InstabilityTheorem::LsiW2 | InstabilityTheorem::TalW2 => {
                if !(m > 1.0 && m.is_finite()) {
                    return Err(invalid("M", format!("must exceed 1, got {m}")));
                }
                Ok(((m - 1.0) / 4.0, 2.0))
            }
            InstabilityTheorem::LsiW1 => Ok((1.0, 0.5)),
            InstabilityTheorem::TalW1 => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(invalid("p", format!("must exceed 1, got {p}")));
                }
                Ok((1.0, (p + 1.0) / 2.0))
            }
        }
    }
}

impl fmt::Display for InstabilityTheorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for InstabilityTheorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InstabilityTheorem::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| invalid("theorem", format!("unknown `{s}`, expected one of lsi-w2, lsi-w1, tal-w2, tal-w1")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityParams {
    /// Second-moment budget for the `W_2` results.
    pub m: f64,
    /// Wasserstein order for `tal-w1`.
    pub p: f64,
}

impl Default for InstabilityParams {
    fn default() -> Self {
        InstabilityParams { m: 5.0, p: 2.0 }
    }
}

/// `H <= 2/(p-1) x^p + 2x` solved for the smallest admissible `x = ||f - 1||_p`.
fn lp_floor_from_entropy(h: f64, p: f64) -> f64 {
    let g = |x: f64| 2.0 / (p - 1.0) * x.powf(p) + 2.0 * x - h;
    if h <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, h.max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn col(series: &[SeriesPoint], f: impl Fn(&SeriesPoint) -> f64) -> Vec<f64> {
    series.iter().map(f).collect()
}

/// Finite-k trend verdicts for the four instability theorems.
pub fn verify_instability_suite(which: InstabilityTheorem, params: InstabilityParams, ks: &[f64]) -> Result<Verdict> {
    check_grid(ks)?;
    let (s, t) = which.bump_params(params.m, params.p)?;
    let lp = 2.0;
    let req = match which {
        InstabilityTheorem::LsiW2 => SeriesRequest { w2: true, moments: vec![2.0], lp_dist: vec![lp], ..Default::default() },
        InstabilityTheorem::TalW2 => SeriesRequest { w2: true, moments: vec![2.0], ..Default::default() },
        InstabilityTheorem::LsiW1 => SeriesRequest { w2: true, moments: vec![1.0], wasserstein: vec![1.0], ..Default::default() },
        InstabilityTheorem::TalW1 => {
            SeriesRequest { w2: true, moments: vec![params.p], wasserstein: vec![params.p], ..Default::default() }
        }
    };
    let series = bump_series(s, t, ks, &req)?;
    let mut v = Verdict::new(which.id(), json!({ "s": s, "t": t, "k": ks, "M": params.m, "p": params.p }));
    let delta = col(&series, |x| x.lsi_deficit);
    let w2sq = col(&series, |x| x.w2_sq.unwrap());
    let tal = col(&series, |x| x.talagrand_deficit.unwrap());
    let last = series.len() - 1;
    let kmax = ks[last];

    let hwi_ratio = |v: &mut Verdict| {
        let worst = series
            .iter()
            .map(|x| {
                let d = x.talagrand_deficit.unwrap();
                d * d - 16.0 * x.rel_entropy * x.lsi_deficit
            })
            .fold(f64::NEG_INFINITY, f64::max);
        v.per_claim.insert(
            "tal_sq_below_16_h_delta".into(),
            Claim::with(0.0, worst, 1e-8, worst <= 1e-8, "max over k of delta_Tal^2 - 16 H delta"),
        );
    };

    match which {
        InstabilityTheorem::LsiW2 | InstabilityTheorem::TalW2 => {
            let target = (params.m - 1.0) / 2.0;
            let pass = (w2sq[last] - target).abs() <= 0.1 * target && approaches(&w2sq, target);
            v.per_claim.insert(
                "w2_squared_limit".into(),
                Claim::with(target, w2sq[last], 0.1 * target, pass, format!("W2^2 at k = {kmax}, last three approach (M-1)/2")),
            );
            let m2 = series[last].moment(2.0).unwrap();
            v.per_claim.insert(
                "second_moment_budget".into(),
                Claim::with(params.m, m2, 0.0, m2 <= params.m, format!("m2 at k = {kmax} must not exceed M")),
            );
            if which == InstabilityTheorem::LsiW2 {
                v.per_claim.insert(
                    "delta_vanishes".into(),
                    Claim::with(0.0, delta[last], 1e-2, delta[last] < 1e-2 && decreasing_tail(&delta), "delta at largest k, last three decreasing"),
                );
                let floor = lp_floor_from_entropy(series[last].rel_entropy, lp);
                let d = series[last].ln_lp_dist(lp).unwrap();
                v.per_claim.insert(
                    "lp_distance_bounded_below".into(),
                    Claim::with(floor.ln(), d, 0.0, d >= floor.ln() && floor > 0.0, "ln ||f-1||_2 against the entropy floor"),
                );
            } else {
                let x = &series[last];
                let bound = (16.0 * x.rel_entropy * x.lsi_deficit).max(0.0).sqrt();
                v.per_claim.insert(
                    "talagrand_deficit_vanishes".into(),
                    Claim::with(
                        0.0,
                        tal[last],
                        bound,
                        tal[last] <= bound && decreasing_tail(&tal),
                        "delta_Tal at largest k below sqrt(16 H delta), last three decreasing",
                    ),
                );
                hwi_ratio(&mut v);
            }
        }
        InstabilityTheorem::LsiW1 => {
            let w1 = col(&series, |x| x.wasserstein(1.0).unwrap());
            let growth = w1[last] / w1[0];
            let increasing = w1.windows(2).all(|p| p[1] > p[0]);
            v.per_claim.insert(
                "w1_grows".into(),
                Claim::with(1.5, growth, 0.0, growth >= 1.5 && increasing, format!("W1(k={kmax}) / W1(k={})", ks[0])),
            );
            let dec = delta.windows(2).all(|p| p[1] < p[0]);
            v.per_claim.insert("delta_decreasing".into(), Claim::with(0.0, delta[last], 0.0, dec, "delta strictly decreasing in k"));
            let mg = gaussian_moment(1.0)?;
            let sandwich = series.iter().zip(&w1).all(|(x, w)| {
                let m = x.moment(1.0).unwrap();
                m - mg <= w + 1e-9 && *w <= m + mg + 1e-9
            });
            v.per_claim.insert(
                "w1_moment_sandwich".into(),
                Claim::with(0.0, 0.0, 1e-9, sandwich, "m1 - m1(gamma) <= W1 <= m1 + m1(gamma) at every k"),
            );
        }
        InstabilityTheorem::TalW1 => {
            let p = params.p;
            let wp = col(&series, |x| x.wasserstein(p).unwrap());
            let increasing = wp.windows(2).all(|q| q[1] > q[0]);
            v.per_claim.insert(
                "wp_grows".into(),
                Claim::with(wp[0], wp[last], 0.0, increasing, format!("W_{p} increasing along the grid")),
            );
            let bound: Vec<f64> = series.iter().map(|x| 16.0 * x.rel_entropy * x.lsi_deficit).collect();
            v.per_claim.insert(
                "hwi_bound_decreasing".into(),
                Claim::with(0.0, bound[last], 0.0, decreasing_tail(&bound), "16 H delta, last three decreasing"),
            );
            hwi_ratio(&mut v);
        }
    }
    v.series = series;
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailPoint {
    pub k: f64,
    pub c_k: f64,
    pub infimum: f64,
    pub second_moment: Tagged,
}

/// `C_k -> 1`, a uniform floor on `f_k`, and growth of the second moment.
pub fn verify_heavytail(ks: &[f64]) -> Result<(Verdict, Vec<HeavyTailPoint>)> {
    check_grid(ks)?;
    let pts = ks
        .iter()
        .map(|&k| {
            if !(k >= 1.0 && k.is_finite()) {
                return Err(invalid("k", format!("must be finite and >= 1, got {k}")));
            }
            let f = make_heavytail_family(k)?;
            Ok(HeavyTailPoint { k, c_k: heavytail_constant(k), infimum: heavytail_infimum(k), second_moment: moment(&f, 2.0)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut v = Verdict::new("heavytail", json!({ "k": ks }));
    let gap: Vec<f64> = pts.iter().map(|p| (p.c_k - 1.0).abs()).collect();
    let in_range = pts.iter().all(|p| p.c_k > 0.0 && p.c_k < 2.0);
    v.per_claim.insert(
        "c_k_in_range".into(),
        Claim::with(1.0, pts.last().unwrap().c_k, 1.0, in_range, "0 < C_k < 2 at every k"),
    );
    v.per_claim.insert(
        "c_k_converges".into(),
        Claim::with(0.0, *gap.last().unwrap(), 0.0, gap.windows(2).all(|w| w[1] < w[0]), "|C_k - 1| strictly decreasing"),
    );
    // C_k < 2 gives f_k >= f_k(1) > e^{1/2} sqrt(2 pi) / (4 pi)
    let alpha = 0.5f64.exp() * (2.0 * std::f64::consts::PI).sqrt() / (4.0 * std::f64::consts::PI);
    let floor = pts.iter().map(|p| p.infimum).fold(f64::INFINITY, f64::min);
    v.per_claim.insert("uniform_floor".into(), Claim::with(alpha, floor, 0.0, floor >= alpha, "min_k inf_x f_k"));
    let m2: Vec<f64> = pts.iter().map(|p| p.second_moment.to_f64()).collect();
    let envelope = moment(&make_heavytail_family(f64::INFINITY)?, 2.0)?;
    let grows = m2.windows(2).all(|w| w[1] > w[0]);
    v.per_claim.insert(
        "second_moment_diverges".into(),
        Claim::with(
            f64::INFINITY,
            *m2.last().unwrap(),
            0.0,
            grows && envelope == Tagged::Divergent,
            "m2(f_k) increasing in k and divergent for the k = inf envelope",
        ),
    );
    Ok((v, pts))
}

/// `ln ||h_k||_{L^p(dm_theta)} - theta b^2 / (4(p - theta)) + (3/4) ln b` along `f_k(s, t)`.
pub fn lemma2_scaling(s: f64, t: f64, ks: &[f64], p: f64, theta: f64, cfg: &QuadratureConfig) -> Result<Verdict> {
    check_grid(ks)?;
    if !(p > theta && theta > 0.0) {
        return Err(invalid("theta", format!("need p > theta > 0, got p={p} theta={theta}")));
    }
    let w = WeightSpec::InvGauss(theta);
    let rows = ks
        .par_iter()
        .map(|&k| {
            let h = lsi_to_bhi_transform(&make_bump_family(s, t, k)?);
            let b = 2.0 * k;
            let ln_norm = weighted_lp_norm_with(&h, p, w, cfg)?.ln();
            Ok((k, ln_norm, ln_norm - theta * b * b / (4.0 * (p - theta)) + 0.75 * b.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let width = q.iter().copied().fold(f64::NEG_INFINITY, f64::max) - q.iter().copied().fold(f64::INFINITY, f64::min);
    let mut v = Verdict::new(
        "bhi-lemma2",
        json!({ "s": s, "t": t, "k": ks, "p": p, "theta": theta, "ln_norm": rows.iter().map(|r| r.1).collect::<Vec<_>>(), "centered": q }),
    );
    v.per_claim.insert("log_norm_band".into(), Claim::with(0.0, width, 2.0, width <= 2.0, "max - min of the centered log norm"));
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhiInstabilityRow {
    pub k: f64,
    pub weight: String,
    pub p: f64,
    pub ln_h_norm: f64,
    pub ln_distance: f64,
    pub ratio: f64,
    pub a: f64,
    pub at_lower_bound: bool,
}

/// Normalized distances from `h_k` to the Gaussians along `f_k(s, t)`.
///
/// Weighted pairs must keep the ratio above `floor`; Lebesgue pairs must at least halve it over the grid.
pub fn verify_bhi_instability(
    s: f64,
    t: f64,
    ks: &[f64],
    pairs: &[(f64, WeightSpec)],
    floor: f64,
    grid: Option<&GridSpec>,
    cfg: &QuadratureConfig,
) -> Result<(Verdict, Vec<BhiInstabilityRow>)> {
    check_grid(ks)?;
    let jobs: Vec<(f64, f64, WeightSpec)> =
        ks.iter().flat_map(|&k| pairs.iter().map(move |&(p, w)| (k, p, w))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, p, w)| {
            let h = lsi_to_bhi_transform(&make_bump_family(s, t, k)?);
            let d = dist_to_optimizers_with(&h, p, w, cfg)?;
            Ok(BhiInstabilityRow {
                k,
                weight: w.to_string(),
                p,
                ln_h_norm: d.h_norm.ln(),
                ln_distance: d.distance.ln(),
                ratio: d.ratio,
                a: d.a,
                at_lower_bound: d.at_lower_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut v = Verdict::new("bhi-instability", json!({ "s": s, "t": t, "k": ks, "floor": floor }));
    for &(p, w) in pairs {
        let sel: Vec<&BhiInstabilityRow> = rows.iter().filter(|r| r.p == p && r.weight == w.to_string()).collect();
        let ratios: Vec<f64> = sel.iter().map(|r| r.ratio).collect();
        let name = format!("{w}_p{p}");
        if w == WeightSpec::Lebesgue {
            let decay = ratios[ratios.len() - 1] / ratios[0];
            v.per_claim.insert(
                format!("{name}_ratio_decay"),
                Claim::with(0.5, decay, 0.0, decay <= 0.5, format!("ratio(k={}) / ratio(k={})", ks[ks.len() - 1], ks[0])),
            );
        } else {
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            v.per_claim.insert(format!("{name}_ratio_floor"), Claim::with(floor, lo, 0.0, lo >= floor, "min over k of the normalized distance"));
            let grows = sel.windows(2).all(|q| q[1].ln_h_norm > q[0].ln_h_norm);
            v.per_claim.insert(
                format!("{name}_norm_grows"),
                Claim::with(0.0, sel[sel.len() - 1].ln_h_norm, 0.0, grows, "ln ||h_k|| increasing in k"),
            );
        }
    }
    if let Some(spec) = grid {
        let dbh = ks
            .par_iter()
            .map(|&k| Ok(bhi_deficit(&lsi_to_bhi_transform(&make_bump_family(s, t, k)?), spec)?.delta_bh))
            .collect::<Result<Vec<f64>>>()?;
        let dec = dbh.windows(2).all(|q| q[1] < q[0]);
        v.per_claim.insert(
            "delta_bh_decreasing".into(),
            Claim::with(0.0, dbh[dbh.len() - 1], 0.0, dec, "delta_BH(h_k) strictly decreasing"),
        );
    }
    Ok((v, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KS: [f64; 7] = [10.0, 14.0, 20.0, 28.0, 40.0, 57.0, 80.0];

    #[test]
    fn exact_model_is_recovered() {
        let b = [Basis::power_log(-2.0), Basis::power(-2.0)];
        let pts: Vec<(f64, f64)> = KS.iter().map(|&k| (k, 3.0 * b[0].eval(k) + 5.0 * b[1].eval(k))).collect();
        let fit = fit_expansion(&pts, &b).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-9 && (fit.coefficients[1] - 5.0).abs() < 1e-9, "{fit:?}");
        assert!(fit.relative_residual < 1e-9 && fit.reliable);
    }

    #[test]
    fn constant_data_fits_constant() {
        let pts: Vec<(f64, f64)> = KS.iter().map(|&k| (k, 2.5)).collect();
        let fit = fit_expansion(&pts, &[Basis::constant(), Basis::power(-1.0)]).unwrap();
        assert!((fit.coefficients[0] - 2.5).abs() < 1e-12 && fit.coefficients[1].abs() < 1e-10);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        let pts: Vec<(f64, f64)> = KS.iter().map(|&k| (k, k)).collect();
        let dup = [Basis::power(1.0), Basis::power(1.0)];
        assert!(matches!(fit_expansion(&pts, &dup), Err(Error::RankDeficient(_))));
        assert!(fit_expansion(&pts[..3], &dup).is_err());
        let mut bad = pts.clone();
        bad.swap(0, 1);
        assert!(fit_expansion(&bad, &[Basis::constant()]).is_err());
    }

    #[test]
    fn entropy_floor_inverts_bound() {
        let x = lp_floor_from_entropy(1.0, 2.0);
        assert!((2.0 * x * x + 2.0 * x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trend_helpers() {
        assert!(approaches(&[1.0, 1.5, 1.8, 1.9], 2.0));
        assert!(!approaches(&[1.0, 1.9, 1.8], 2.0));
        assert!(decreasing_tail(&[3.0, 2.0, 1.0]));
        assert!(!decreasing_tail(&[3.0, 2.0]));
        assert_eq!("tal-w1".parse::<InstabilityTheorem>().unwrap(), InstabilityTheorem::TalW1);
        assert!("tal-w3".parse::<InstabilityTheorem>().is_err());
    }

    #[test]
    fn heavytail_verdict() {
        let (v, pts) = verify_heavytail(&[2.0, 5.0, 10.0, 20.0]).unwrap();
        assert!(v.pass(), "{v:?}");
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn delta_fit_on_theorem1_sequence() {
        let series = bump_series(1.0, 2.0, &KS, &SeriesRequest::default()).unwrap();
        let pts: Vec<(f64, f64)> = series.iter().map(|x| (x.k, x.lsi_deficit)).collect();
        let fit = fit_expansion(&pts, &[Basis::power_log(-2.0), Basis::power(-2.0)]).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 0.03, "{fit:?}");
        assert!((fit.coefficients[1] - 1.193_147_180_559_945_3).abs() < 0.06, "{fit:?}");
    }
}
