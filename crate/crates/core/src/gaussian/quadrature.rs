//! Adaptive 21-point Gauss-Kronrod quadrature carried out in log space.
//!
//! Integrands return [`LogValue`]s, so values far outside the `f64` range
//! (tilted Gaussian tails, `|f - 1|^p` for large tilts) integrate without
//! overflow. Semi-infinite ranges are covered by unit panels marching outward
//! until a concavity bound on the remaining tail is negligible.

use serde::{Deserialize, Serialize};

use super::{log_pdf, LogValue};
use crate::error::{invalid, Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Width of the panels used to march over semi-infinite ranges.
    pub panel_width: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { abs_tol: 1e-12, rel_tol: 1e-10, max_subdivisions: 2000, panel_width: 1.0, max_panels: 20_000 }
    }
}

impl QuadratureConfig {
    /// Purely relative accuracy, for quantities that may be astronomically small.
    /// An `abs_tol` at or below `f64::MIN_POSITIVE` disables the absolute floor.
    pub fn relative(rel_tol: f64) -> Self {
        QuadratureConfig { abs_tol: f64::MIN_POSITIVE, rel_tol, ..Default::default() }
    }

    fn abs_floor(&self) -> LogValue {
        if self.abs_tol <= f64::MIN_POSITIVE {
            LogValue::ZERO
        } else {
            LogValue::from_f64(self.abs_tol)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(invalid("abs_tol", format!("must be > 0, got {}", self.abs_tol)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(invalid("rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.max_subdivisions == 0 {
            return Err(invalid("max_subdivisions", "must be positive"));
        }
        if !(self.panel_width > 0.0 && self.panel_width.is_finite()) {
            return Err(invalid("panel_width", format!("must be finite and > 0, got {}", self.panel_width)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogIntegral {
    pub value: LogValue,
    pub error: LogValue,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl LogIntegral {
    pub fn to_linear(self) -> Integral {
        Integral { value: self.value.to_f64(), error: self.error.to_f64().abs() }
    }

    /// Error relative to the magnitude of the value.
    pub fn rel_error(&self) -> f64 {
        if self.value.is_zero() {
            if self.error.is_zero() {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.error.ln() - self.value.ln()).exp()
        }
    }
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: LogValue,
    error: LogValue,
    splittable: bool,
}

fn gk21<F: Fn(f64) -> LogValue>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut xs = [0.0; 21];
    let mut ls = [LogValue::ZERO; 21];
    xs[0] = c;
    for i in 0..10 {
        let dx = h * XGK[i];
        xs[1 + 2 * i] = c - dx;
        xs[2 + 2 * i] = c + dx;
    }
    let mut m = f64::NEG_INFINITY;
    for (x, l) in xs.iter().zip(ls.iter_mut()) {
        *l = f(*x);
        if !l.is_finite() || l.log_abs.is_nan() {
            return Err(Error::NonFiniteIntegrand { x: *x });
        }
        if !l.is_zero() {
            m = m.max(l.log_abs);
        }
    }
    if m == f64::NEG_INFINITY {
        return Ok(Panel { a, b, value: LogValue::ZERO, error: LogValue::ZERO, splittable: true });
    }
    let s: Vec<f64> = ls.iter().map(|l| l.scale_ln(-m).to_f64()).collect();

    let mut resk = WGK[10] * s[0];
    let mut resg = 0.0;
    let mut resabs = (WGK[10] * s[0]).abs();
    for j in 0..10 {
        let (f1, f2) = (s[1 + 2 * j], s[2 + 2 * j]);
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (s[0] - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((s[1 + 2 * j] - reskh).abs() + (s[2 + 2 * j] - reskh).abs());
    }
    let ah = h.abs();
    let result = resk * h;
    resabs *= ah;
    resasc *= ah;
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    let splittable = (b - a).abs() > 1e-13 * (a.abs().max(b.abs()) + 1e-300);
    Ok(Panel {
        a,
        b,
        value: LogValue::from_f64(result).scale_ln(m),
        error: LogValue::from_f64(err).scale_ln(m),
        splittable,
    })
}

fn adaptive<F: Fn(f64) -> LogValue>(
    f: &F,
    a: f64,
    b: f64,
    abs_floor: LogValue,
    rel_tol: f64,
    max_sub: usize,
) -> Result<LogIntegral> {
    let mut panels = vec![gk21(f, a, b)?];
    let mut evals = 21;
    loop {
        let vals: Vec<LogValue> = panels.iter().map(|p| p.value).collect();
        let errs: Vec<LogValue> = panels.iter().map(|p| p.error).collect();
        let total = LogValue::sum_slice(&vals);
        let err = LogValue::sum_slice(&errs);
        let rel = total.abs().scale_ln(rel_tol.ln());
        let tol = if rel > abs_floor { rel } else { abs_floor };
        if err <= tol {
            return Ok(LogIntegral { value: total, error: err, evaluations: evals });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i);
        let i = match worst {
            Some(i) if panels.len() < max_sub => i,
            None => return Ok(LogIntegral { value: total, error: err, evaluations: evals }),
            _ => {
                // roundoff-limited: accept a result within a few multiples of the target
                if err <= tol.scale_ln(100f64.ln()) {
                    return Ok(LogIntegral { value: total, error: err, evaluations: evals });
                }
                return Err(Error::ToleranceNotMet {
                    estimate: total.to_f64(),
                    error: err.to_f64(),
                    subdivisions: panels.len(),
                });
            }
        };
        let p = panels.swap_remove(i);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk21(f, p.a, mid)?);
        panels.push(gk21(f, mid, p.b)?);
        evals += 42;
    }
}

fn march<F: Fn(f64) -> LogValue>(f: &F, lo: f64, cfg: &QuadratureConfig) -> Result<LogIntegral> {
    let w = cfg.panel_width;
    let abs_tol = cfg.abs_floor();
    let mut vals = Vec::new();
    let mut errs = Vec::new();
    let mut evals = 0;
    let mut x = lo;
    for _ in 0..cfg.max_panels {
        let running = LogValue::sum_slice(&vals).abs().scale_ln((0.1 * cfg.rel_tol).ln());
        let floor = if running > abs_tol { running } else { abs_tol };
        let r = adaptive(f, x, x + w, floor, cfg.rel_tol, cfg.max_subdivisions)?;
        vals.push(r.value);
        errs.push(r.error);
        evals += r.evaluations;
        x += w;

        let h = 1e-3 * w;
        let (lt, lh) = (f(x).abs(), f(x - h).abs());
        evals += 2;
        let total = LogValue::sum_slice(&vals).abs();
        if lt.is_zero() {
            if lh.is_zero() || !total.is_zero() {
                break;
            }
            continue;
        }
        let slope = if lh.is_zero() { f64::INFINITY } else { (lt.ln() - lh.ln()) / h };
        if slope < 0.0 {
            let tail = LogValue::from_ln(lt.ln() - (-slope).ln());
            let target = total.scale_ln((1e-3 * cfg.rel_tol).ln());
            if tail <= target || (!abs_tol.is_zero() && tail <= abs_tol.scale_ln(1e-3f64.ln())) {
                errs.push(tail);
                return Ok(LogIntegral {
                    value: LogValue::sum_slice(&vals),
                    error: LogValue::sum_slice(&errs),
                    evaluations: evals,
                });
            }
        }
    }
    if x - lo >= w * cfg.max_panels as f64 - 0.5 * w {
        let v = LogValue::sum_slice(&vals);
        return Err(Error::ToleranceNotMet {
            estimate: v.to_f64(),
            error: f64::INFINITY,
            subdivisions: cfg.max_panels,
        });
    }
    Ok(LogIntegral { value: LogValue::sum_slice(&vals), error: LogValue::sum_slice(&errs), evaluations: evals })
}

/// Integrate a log-represented integrand over `[lo, hi]`; either end may be infinite.
///
/// On infinite ranges the log of the integrand must eventually be concave and
/// decreasing, which holds for everything with Gaussian or exponential decay.
pub fn integrate_log<F: Fn(f64) -> LogValue>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<LogIntegral> {
    cfg.validate()?;
    if lo.is_nan() || hi.is_nan() {
        return Err(invalid("interval", "bounds must not be NaN"));
    }
    if lo == hi {
        return Ok(LogIntegral { value: LogValue::ZERO, error: LogValue::ZERO, evaluations: 0 });
    }
    if lo > hi {
        let r = integrate_log(f, hi, lo, cfg)?;
        return Ok(LogIntegral { value: -r.value, ..r });
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(&f, lo, hi, cfg.abs_floor(), cfg.rel_tol, cfg.max_subdivisions),
        (true, false) => march(&f, lo, cfg),
        (false, true) => march(&|x: f64| f(-x), -hi, cfg),
        (false, false) => {
            let l = march(&|x: f64| f(-x), 0.0, cfg)?;
            let r = march(&f, 0.0, cfg)?;
            Ok(LogIntegral {
                value: l.value + r.value,
                error: l.error + r.error,
                evaluations: l.evaluations + r.evaluations,
            })
        }
    }
}

/// `int_lo^hi f dgamma` for a plain real integrand.
pub fn integrate_gauss<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    let r = integrate_log(|x| LogValue::from_f64(f(x)).scale_ln(log_pdf(x)), lo, hi, cfg)?;
    Ok(r.to_linear())
}

/// Integrate over `[lo, hi]` after splitting at the given interior breakpoints.
pub fn integrate_log_split<F: Fn(f64) -> LogValue>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<LogIntegral> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|b, a| *b - *a <= 1e-9 * (1.0 + a.abs()));
    let mut edges = vec![lo];
    edges.extend(pts);
    edges.push(hi);
    let mut vals = Vec::new();
    let mut errs = Vec::new();
    let mut evals = 0;
    for w in edges.windows(2) {
        let r = integrate_log(&f, w[0], w[1], cfg)?;
        vals.push(r.value);
        errs.push(r.error);
        evals += r.evaluations;
    }
    Ok(LogIntegral { value: LogValue::sum_slice(&vals), error: LogValue::sum_slice(&errs), evaluations: evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{log_sf, sf};
    use proptest::prelude::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_log(|x| LogValue::from_f64(x.powi(5) - 3.0 * x * x), 0.0, 2.0, &Default::default()).unwrap();
        assert!((r.value.to_f64() - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_total_mass() {
        let r = integrate_gauss(|_| 1.0, f64::NEG_INFINITY, f64::INFINITY, &Default::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_moment() {
        let r = integrate_gauss(|x| x * x, f64::NEG_INFINITY, f64::INFINITY, &Default::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_tail_in_log_space() {
        let cfg = QuadratureConfig::relative(1e-12);
        let r = integrate_log(|x| LogValue::from_ln(log_pdf(x)), 60.0, f64::INFINITY, &cfg).unwrap();
        assert!(((r.value.ln() - log_sf(60.0)) / log_sf(60.0)).abs() < 1e-13);
    }

    #[test]
    fn kink_converges() {
        let r = integrate_log(|x| LogValue::from_f64((x - 0.3).abs()), -1.0, 1.0, &Default::default()).unwrap();
        assert!((r.value.to_f64() - (1.3 * 1.3 + 0.7 * 0.7) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = integrate_log(|x| LogValue::from_f64(1.0 / x), -1.0, 1.0, &Default::default());
        assert!(matches!(r, Err(Error::NonFiniteIntegrand { .. })));
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = QuadratureConfig { abs_tol: 0.0, ..Default::default() };
        assert!(integrate_gauss(|_| 1.0, 0.0, 1.0, &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tilt_identity(b in 1f64..20.0, k in 0f64..10.0) {
            // int_k^inf exp(b x - b^2/2) dgamma = Phi(b - k)
            let cfg = QuadratureConfig::relative(1e-11);
            let r = integrate_gauss(|x| (b * x - 0.5 * b * b).exp(), k, f64::INFINITY, &cfg).unwrap();
            let exact = sf(k - b);
            prop_assert!(((r.value - exact) / exact).abs() < 1e-10);
        }
    }
}
