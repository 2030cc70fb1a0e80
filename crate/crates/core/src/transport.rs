//! One-dimensional optimal transport between measures `f gamma`.
//!
//! `W_p^p = int_0^1 |F^{-1}(u) - G^{-1}(u)|^p du`. The unit interval is split at
//! `1/2`; each half is integrated in `s = ln u` (or `s = ln(1 - u)`) so the
//! tails, where tilted measures carry their transport cost, are resolved in log
//! space with exact piecewise quantiles.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::density::PiecewiseLogDensity;
use crate::error::{invalid, Error, Result};
use crate::functionals::{fisher_info, moment, rel_entropy, lsi_deficit, Tagged};
use crate::gaussian::{integrate_log_split as integrate_split, LogValue, QuadratureConfig, LN_2};
use crate::serde_ext::fmt17;

fn quad_cfg() -> QuadratureConfig {
    QuadratureConfig::relative(1e-11)
}

fn half_integral<Q>(mu: &PiecewiseLogDensity, nu: &PiecewiseLogDensity, p: f64, upper: bool, quantile: Q) -> Result<LogValue>
where
    Q: Fn(&PiecewiseLogDensity, f64) -> Result<f64>,
{
    let half = -LN_2;
    let mut breaks = Vec::new();
    for m in [mu, nu] {
        for x in m.breakpoints() {
            let s = if upper { m.log_sf(x)? } else { m.log_cdf(x)? };
            if s < half && s.is_finite() {
                breaks.push(s);
            }
        }
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| {
        let q = (|| -> Result<LogValue> {
            let a = quantile(mu, s)?;
            let b = quantile(nu, s)?;
            Ok(LogValue::from_f64(a - b).powf(p).scale_ln(s))
        })();
        match q {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                LogValue::ZERO
            }
        }
    };
    let r = integrate_split(integrand, f64::NEG_INFINITY, half, &breaks, &quad_cfg())?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r.value)
}

/// `W_p(mu, nu)^p` as a log value.
pub fn wasserstein_pp(mu: &PiecewiseLogDensity, nu: &PiecewiseLogDensity, p: f64) -> Result<LogValue> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("Wasserstein order must be finite and >= 1, got {p}")));
    }
    for m in [mu, nu] {
        if moment(m, p)? == Tagged::Divergent {
            return Err(Error::Divergent(format!("{}: p-th moment is infinite", m.label())));
        }
    }
    let lower = half_integral(mu, nu, p, false, |m, s| m.inv_log_cdf(s))?;
    let upper = half_integral(mu, nu, p, true, |m, s| m.inv_log_sf(s))?;
    Ok(lower + upper)
}

pub fn wasserstein_p(mu: &PiecewiseLogDensity, nu: &PiecewiseLogDensity, p: f64) -> Result<f64> {
    Ok(wasserstein_pp(mu, nu, p)?.powf(1.0 / p).to_f64())
}

/// `delta_Tal(f) = 2 H(f) - W_2(f gamma, gamma)^2`.
pub fn talagrand_deficit(f: &PiecewiseLogDensity) -> Result<f64> {
    let w2 = wasserstein_pp(f, &PiecewiseLogDensity::standard_gaussian(), 2.0)?.to_f64();
    Ok(2.0 * rel_entropy(f)? - w2)
}

/// The chain `delta >= (sqrt I - W2)^2/2 >= (sqrt(2H) - W2)^2/2 >= delta_Tal^2/(16 H)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwiReport {
    pub label: String,
    pub fisher_info: f64,
    pub rel_entropy: f64,
    pub w2: f64,
    pub lsi_deficit: f64,
    pub talagrand_deficit: f64,
    pub hwi_term: f64,
    pub talagrand_term: f64,
    pub ratio_term: f64,
    pub holds: bool,
}

pub fn hwi_chain(f: &PiecewiseLogDensity) -> Result<HwiReport> {
    let i = fisher_info(f)?;
    let h = rel_entropy(f)?;
    let delta = lsi_deficit(f)?;
    let w2sq = wasserstein_pp(f, &PiecewiseLogDensity::standard_gaussian(), 2.0)?.to_f64();
    let w2 = w2sq.sqrt();
    let tal = 2.0 * h - w2sq;
    let hwi_term = 0.5 * (i.sqrt() - w2).powi(2);
    let talagrand_term = 0.5 * ((2.0 * h).max(0.0).sqrt() - w2).powi(2);
    let ratio_term = if h > 0.0 { tal * tal / (16.0 * h) } else { 0.0 };
    let slack = 1e-8 * (1.0 + i + h);
    let holds = delta + slack >= hwi_term
        && hwi_term + slack >= talagrand_term
        && talagrand_term + slack >= ratio_term
        && tal >= -slack
        && delta >= -slack;
    Ok(HwiReport {
        label: f.label().to_string(),
        fisher_info: i,
        rel_entropy: h,
        w2,
        lsi_deficit: delta,
        talagrand_deficit: tal,
        hwi_term,
        talagrand_term,
        ratio_term,
        holds,
    })
}

impl HwiReport {
    pub const CSV_HEADER: &'static str = "measure,I,H,W2,delta,delta_tal,hwi_term,tal_term,ratio_term,holds";

    pub fn csv_row(&self) -> String {
        [
            self.label.replace(',', ";"),
            fmt17(self.fisher_info),
            fmt17(self.rel_entropy),
            fmt17(self.w2),
            fmt17(self.lsi_deficit),
            fmt17(self.talagrand_deficit),
            fmt17(self.hwi_term),
            fmt17(self.talagrand_term),
            fmt17(self.ratio_term),
            self.holds.to_string(),
        ]
        .join(",")
    }
}

/// `2^{1-p} m_p(mu) - m_p(gamma) <= W_p^p <= 2^{p-1} (m_p(mu) + m_p(gamma))`, with the
/// sharper `m_1(mu) - m_1(gamma) <= W_1 <= m_1(mu) + m_1(gamma)` at `p = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub p: f64,
    pub lower: f64,
    /// `W_p(mu, gamma)^p`.
    pub w_pp: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn moment_sandwich_check(f: &PiecewiseLogDensity, p: f64) -> Result<SandwichReport> {
    let m = match moment(f, p)? {
        Tagged::Finite(m) => m,
        Tagged::Divergent => return Err(Error::Divergent(format!("{}: p-th moment is infinite", f.label()))),
    };
    let g = crate::gaussian::gaussian_moment(p)?;
    let w = wasserstein_pp(f, &PiecewiseLogDensity::standard_gaussian(), p)?.to_f64();
    let c = 2f64.powf(p - 1.0);
    let (lower, upper) = (m / c - g, c * (m + g));
    let slack = 1e-9 * upper;
    Ok(SandwichReport { p, lower, w_pp: w, upper, holds: lower <= w + slack && w <= upper + slack })
}

/// Quantiles on a logit-spaced grid, interpolated linearly in `logit(u)`.
///
/// Outside the tabulated range the exact piecewise inverse takes over.
#[derive(Clone, Debug)]
pub struct QuantileTable {
    density: PiecewiseLogDensity,
    logits: Vec<f64>,
    values: Vec<f64>,
}

fn logit(u: f64) -> f64 {
    u.ln() - (-u).ln_1p()
}

impl QuantileTable {
    pub const U_MIN: f64 = 1e-12;

    pub fn build(f: &PiecewiseLogDensity, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "a table needs at least two nodes"));
        }
        let (a, b) = (logit(Self::U_MIN), logit(1.0 - Self::U_MIN));
        let mut logits = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let l = a + (b - a) * i as f64 / (n - 1) as f64;
            // ln u and ln(1 - u) straight from the logit keep both tails exact
            let x = if l <= 0.0 { f.inv_log_cdf(-(-l).exp().ln_1p())? } else { f.inv_log_sf(-l.exp().ln_1p())? };
            logits.push(l);
            values.push(x);
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::RootNotFound(format!("quantile table not increasing at {}", w[0])));
            }
        }
        Ok(QuantileTable { density: f.clone(), logits, values })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.logits.iter().map(|l| 1.0 / (1.0 + (-l).exp())).zip(self.values.iter().copied())
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid("u", format!("must lie in (0, 1), got {u}")));
        }
        let l = logit(u);
        let n = self.logits.len();
        if l <= self.logits[0] || l >= self.logits[n - 1] {
            return self.density.quantile(u);
        }
        let i = self.logits.partition_point(|x| *x <= l).clamp(1, n - 1);
        let (l0, l1) = (self.logits[i - 1], self.logits[i]);
        let w = (l - l0) / (l1 - l0);
        Ok(self.values[i - 1] * (1.0 - w) + self.values[i] * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{make_bump_family, make_heavytail_family, make_shifted_gaussian};

    #[test]
    fn translation_cost_is_shift() {
        let g = PiecewiseLogDensity::standard_gaussian();
        for &b in &[0.5, 2.0, 6.0] {
            let gb = make_shifted_gaussian(b).unwrap();
            for &p in &[1.0, 2.0, 3.5] {
                let w = wasserstein_p(&gb, &g, p).unwrap();
                assert!((w - b).abs() < 1e-9 * b, "b={b} p={p} w={w}");
            }
        }
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let f = make_bump_family(1.0, 1.0, 4.0).unwrap();
        assert!(wasserstein_p(&f, &f, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn talagrand_is_tight_for_translates() {
        let gb = make_shifted_gaussian(1.5).unwrap();
        assert!(talagrand_deficit(&gb).unwrap().abs() < 1e-9);
    }

    #[test]
    fn bump_w1_matches_cdf_formula() {
        // W_1 = int |F - G| dx
        let f = make_bump_family(2.0, 1.0, 3.0).unwrap();
        let g = PiecewiseLogDensity::standard_gaussian();
        let direct = {
            let cfg = QuadratureConfig { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
            let mut edges = vec![f64::NEG_INFINITY];
            edges.extend(f.breakpoints());
            edges.push(f64::INFINITY);
            let diff = |x: f64| {
                let a = if x < 0.0 { f.log_cdf(x).unwrap().exp() } else { -f.log_sf(x).unwrap().exp_m1() };
                let b = crate::gaussian::cdf(x);
                LogValue::from_f64((a - b).abs())
            };
            edges
                .windows(2)
                .map(|w| crate::gaussian::integrate_log(diff, w[0], w[1], &cfg).unwrap().value.to_f64())
                .sum::<f64>()
        };
        let w1 = wasserstein_p(&f, &g, 1.0).unwrap();
        assert!((w1 - direct).abs() < 1e-8 * direct, "{w1} vs {direct}");
    }

    #[test]
    fn hwi_chain_holds_on_bumps() {
        for &(s, t, k) in &[(1.0, 1.0, 3.0), (2.0, 0.5, 5.0), (1.0, 2.0, 10.0)] {
            let r = hwi_chain(&make_bump_family(s, t, k).unwrap()).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn sandwich_holds() {
        let f = make_bump_family(1.0, 1.0, 5.0).unwrap();
        for &p in &[1.0, 2.0, 3.0] {
            assert!(moment_sandwich_check(&f, p).unwrap().holds);
        }
        let g3 = make_shifted_gaussian(3.0).unwrap();
        let r = moment_sandwich_check(&g3, 1.0).unwrap();
        assert!(r.holds && (r.w_pp - 3.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_table_round_trips() {
        let f = make_bump_family(1.0, 2.0, 10.0).unwrap();
        let t = QuantileTable::build(&f, 400).unwrap();
        for (u, x) in t.nodes() {
            let back = f.cdf(x).unwrap();
            assert!((back - u).abs() <= 1e-9 * u.min(1.0 - u).max(1e-3), "u={u} x={x} back={back}");
        }
        assert_eq!(t.eval(1e-14).unwrap(), f.quantile(1e-14).unwrap());
        assert!(t.eval(0.5).unwrap().abs() < 1e-8);
        let g = PiecewiseLogDensity::standard_gaussian();
        assert!((g.quantile(crate::gaussian::cdf(1.5)).unwrap() - 1.5).abs() < 1e-12);
        assert!(g.quantile(1.0).is_err());
    }

    #[test]
    fn cauchy_envelope_is_rejected() {
        let env = make_heavytail_family(f64::INFINITY).unwrap();
        let g = PiecewiseLogDensity::standard_gaussian();
        assert!(matches!(wasserstein_p(&env, &g, 1.0), Err(Error::Divergent(_))));
        assert!(wasserstein_p(&g, &g, 0.5).is_err());
    }
}
