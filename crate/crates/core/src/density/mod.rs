//! Probability densities `f` relative to the standard Gaussian, built from
//! analytic pieces, and the counterexample families.

mod bump;
mod heavytail;
mod piece;

pub use bump::{make_bump_family, make_bump_family_with, BumpParams};
pub use heavytail::{heavytail_constant, heavytail_infimum, make_heavytail_family, HeavyTailParams};
pub use piece::{Bridge, BridgeShape, Piece};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::{LogValue, QuadratureConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// Segments describe `[0, inf)` and are mirrored to the negative axis.
    Even,
    /// Segments cover the whole line.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub lo: f64,
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub hi: f64,
    pub piece: Piece,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    ShiftedGaussian { b: f64 },
    Bump(BumpParams),
    HeavyTail(HeavyTailParams),
    Custom,
}

/// Serializable description; the normalization is recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub label: String,
    pub symmetry: Symmetry,
    pub segments: Vec<Segment>,
    pub family: Family,
}

#[derive(Clone, Debug)]
struct FullSegment {
    lo: f64,
    hi: f64,
    piece: usize,
    reflect: bool,
    mass: LogValue,
}

/// `f = c * f~` with `f~` piecewise analytic and `c` fixed by `int f dgamma = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "DensitySpec", into = "DensitySpec")]
pub struct PiecewiseLogDensity {
    spec: DensitySpec,
    log_scale: f64,
    full: Vec<FullSegment>,
    /// Unnormalized mass strictly above segment `i`.
    above: Vec<LogValue>,
    /// Unnormalized mass strictly below segment `i`.
    below: Vec<LogValue>,
}

impl TryFrom<DensitySpec> for PiecewiseLogDensity {
    type Error = crate::error::Error;
    fn try_from(spec: DensitySpec) -> Result<Self> {
        PiecewiseLogDensity::new(spec)
    }
}

impl From<PiecewiseLogDensity> for DensitySpec {
    fn from(d: PiecewiseLogDensity) -> Self {
        d.spec
    }
}

pub(crate) fn internal_cfg() -> QuadratureConfig {
    QuadratureConfig::relative(1e-13)
}

impl PiecewiseLogDensity {
    pub fn new(spec: DensitySpec) -> Result<Self> {
        let segs = &spec.segments;
        if segs.is_empty() {
            return Err(invalid("segments", "at least one segment is required"));
        }
        let start = match spec.symmetry {
            Symmetry::Even => 0.0,
            Symmetry::None => f64::NEG_INFINITY,
        };
        if segs[0].lo != start {
            return Err(invalid("segments", format!("first segment must start at {start}")));
        }
        if segs.last().unwrap().hi != f64::INFINITY {
            return Err(invalid("segments", "last segment must extend to +inf"));
        }
        for w in segs.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(invalid("segments", format!("gap or overlap at {} / {}", w[0].hi, w[1].lo)));
            }
        }
        for s in segs {
            if !(s.hi > s.lo) {
                return Err(invalid("segments", format!("empty segment [{}, {}]", s.lo, s.hi)));
            }
            if let Piece::Bridge(b) = &s.piece {
                if !(b.y0 > 0.0 && b.y1 > 0.0 && b.x1 > b.x0) {
                    return Err(invalid("bridge", "levels must be positive and x1 > x0"));
                }
            }
        }

        let cfg = internal_cfg();
        let mut full = Vec::new();
        if spec.symmetry == Symmetry::Even {
            for (i, s) in segs.iter().enumerate().rev() {
                full.push(FullSegment { lo: -s.hi, hi: -s.lo, piece: i, reflect: true, mass: LogValue::ZERO });
            }
        }
        for (i, s) in segs.iter().enumerate() {
            full.push(FullSegment { lo: s.lo, hi: s.hi, piece: i, reflect: false, mass: LogValue::ZERO });
        }
        for fs in full.iter_mut() {
            let s = &segs[fs.piece];
            fs.mass = s.piece.mass(s.lo, s.hi, &cfg)?;
        }
        let masses: Vec<LogValue> = full.iter().map(|f| f.mass).collect();
        let total = LogValue::sum_slice(&masses);
        if !(total.is_positive() && total.ln().is_finite()) {
            return Err(invalid("segments", format!("total mass must be positive and finite, got {total}")));
        }
        let n = full.len();
        let mut above = vec![LogValue::ZERO; n];
        let mut below = vec![LogValue::ZERO; n];
        for i in (0..n.saturating_sub(1)).rev() {
            above[i] = above[i + 1] + full[i + 1].mass;
        }
        for i in 1..n {
            below[i] = below[i - 1] + full[i - 1].mass;
        }
        Ok(PiecewiseLogDensity { spec, log_scale: -total.ln(), full, above, below })
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }

    pub fn family(&self) -> &Family {
        &self.spec.family
    }

    pub fn symmetry(&self) -> Symmetry {
        self.spec.symmetry
    }

    /// `ln c`.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Unnormalized total mass `N = 1 / c`.
    pub fn total_mass(&self) -> LogValue {
        LogValue::from_ln(-self.log_scale)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.spec.segments
    }

    /// Segments mapped to `[0, inf)` (or the whole line) together with their multiplicity.
    pub(crate) fn half_segments(&self) -> impl Iterator<Item = (&Segment, f64)> {
        let mult = if self.spec.symmetry == Symmetry::Even { 2.0 } else { 1.0 };
        self.spec.segments.iter().map(move |s| (s, mult))
    }

    fn locate(&self, x: f64) -> usize {
        match self.full.iter().position(|s| x < s.hi) {
            Some(i) => i,
            None => self.full.len() - 1,
        }
    }

    fn piece_at(&self, x: f64) -> (&Piece, f64) {
        let fs = &self.full[self.locate(x)];
        let p = &self.spec.segments[fs.piece].piece;
        if fs.reflect {
            (p, -x)
        } else {
            (p, x)
        }
    }

    /// `ln f(x)` with `f` normalized against `gamma`.
    pub fn log_density(&self, x: f64) -> f64 {
        let (p, y) = self.piece_at(x);
        self.log_scale + p.log_value(y)
    }

    /// `f(x)`; overflows to `inf` where the tilt is astronomically large.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// `(ln f)'(x)`.
    pub fn dlog_density(&self, x: f64) -> f64 {
        let fs = &self.full[self.locate(x)];
        let p = &self.spec.segments[fs.piece].piece;
        if fs.reflect {
            -p.dlog(-x)
        } else {
            p.dlog(x)
        }
    }

    /// Log of the Lebesgue density of `mu = f gamma`.
    pub fn log_lebesgue_density(&self, x: f64) -> f64 {
        let (p, y) = self.piece_at(x);
        self.log_scale + p.log_lebesgue(y)
    }

    /// Segment boundaries on the whole line, excluding the infinite ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.full.iter().map(|s| s.lo).filter(|x| x.is_finite()).collect();
        b.dedup();
        b
    }

    fn partial_mass(&self, i: usize, u: f64, w: f64) -> Result<LogValue> {
        let fs = &self.full[i];
        let p = &self.spec.segments[fs.piece].piece;
        let cfg = internal_cfg();
        if fs.reflect {
            p.mass(-w, -u, &cfg)
        } else {
            p.mass(u, w, &cfg)
        }
    }

    /// `ln mu((x, inf))`.
    pub fn log_sf(&self, x: f64) -> Result<f64> {
        if x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let i = self.locate(x);
        let fs = &self.full[i];
        let part = if x <= fs.lo { fs.mass } else { self.partial_mass(i, x, fs.hi)? };
        Ok(((part + self.above[i]).ln() + self.log_scale).min(0.0))
    }

    /// `ln mu((-inf, x])`.
    pub fn log_cdf(&self, x: f64) -> Result<f64> {
        if x == f64::INFINITY {
            return Ok(0.0);
        }
        let i = self.locate(x);
        let fs = &self.full[i];
        let part = self.partial_mass(i, fs.lo, x)?;
        Ok(((part + self.below[i]).ln() + self.log_scale).min(0.0))
    }

    /// Upper quantile: the `x` with `ln mu((x, inf)) = lq`.
    pub fn inv_log_sf(&self, lq: f64) -> Result<f64> {
        if lq >= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if lq == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        let target = LogValue::from_ln(lq - self.log_scale);
        let mut i = self.full.len() - 1;
        while i > 0 && self.above[i] + self.full[i].mass < target {
            i -= 1;
        }
        let rest = target - self.above[i];
        let fs = &self.full[i];
        if !rest.is_positive() {
            return Ok(fs.hi);
        }
        if rest >= fs.mass {
            return Ok(fs.lo);
        }
        let p = &self.spec.segments[fs.piece].piece;
        let cfg = internal_cfg();
        if fs.reflect {
            Ok(-p.solve_from_left(-fs.hi, -fs.lo, rest, &cfg)?)
        } else {
            p.solve_from_right(fs.lo, fs.hi, rest, &cfg)
        }
    }

    /// Lower quantile: the `x` with `ln mu((-inf, x]) = lp`.
    pub fn inv_log_cdf(&self, lp: f64) -> Result<f64> {
        if lp >= 0.0 {
            return Ok(f64::INFINITY);
        }
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let target = LogValue::from_ln(lp - self.log_scale);
        let n = self.full.len();
        let mut i = 0;
        while i + 1 < n && self.below[i] + self.full[i].mass < target {
            i += 1;
        }
        let rest = target - self.below[i];
        let fs = &self.full[i];
        if !rest.is_positive() {
            return Ok(fs.lo);
        }
        if rest >= fs.mass {
            return Ok(fs.hi);
        }
        let p = &self.spec.segments[fs.piece].piece;
        let cfg = internal_cfg();
        if fs.reflect {
            Ok(-p.solve_from_right(-fs.hi, -fs.lo, rest, &cfg)?)
        } else {
            p.solve_from_left(fs.lo, fs.hi, rest, &cfg)
        }
    }

    /// `mu((-inf, x])`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            Ok(self.log_cdf(x)?.exp())
        } else {
            Ok(-self.log_sf(x)?.exp_m1())
        }
    }

    /// The `x` with `mu((-inf, x]) = u`, solved on whichever side of the median is well conditioned.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid("u", format!("must lie in (0, 1), got {u}")));
        }
        if u <= 0.5 {
            self.inv_log_cdf(u.ln())
        } else {
            self.inv_log_sf((-u).ln_1p())
        }
    }

    /// Normalized mass of each whole-line segment, in order.
    pub fn segment_masses(&self) -> Vec<(f64, f64, LogValue)> {
        self.full.iter().map(|s| (s.lo, s.hi, s.mass.scale_ln(self.log_scale))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        crate::serde_ext::to_json17(&self.spec)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: DensitySpec = serde_json::from_str(s)?;
        PiecewiseLogDensity::new(spec)
    }

    /// The constant density `1`, i.e. `gamma` itself.
    pub fn standard_gaussian() -> Self {
        PiecewiseLogDensity::new(DensitySpec {
            label: "gamma".into(),
            symmetry: Symmetry::Even,
            segments: vec![Segment { lo: 0.0, hi: f64::INFINITY, piece: Piece::Flat { log_value: 0.0 } }],
            family: Family::Gaussian,
        })
        .expect("valid")
    }

    /// Interpolate `ln f` linearly between grid nodes and extend the end slopes.
    pub fn from_grid(label: &str, xs: &[f64], log_values: &[f64]) -> Result<Self> {
        if xs.len() < 2 || xs.len() != log_values.len() {
            return Err(invalid("grid", "need at least two nodes and matching value count"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid", "nodes must be strictly increasing"));
        }
        if log_values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid", "log values must be finite"));
        }
        let n = xs.len();
        let tilt = |i: usize| {
            let beta = (log_values[i + 1] - log_values[i]) / (xs[i + 1] - xs[i]);
            let alpha = log_values[i] - beta * xs[i];
            Piece::ExpTilt { log_r: alpha + 0.5 * beta * beta, b: beta }
        };
        let mut segments = Vec::with_capacity(n + 1);
        for i in 0..n - 1 {
            let lo = if i == 0 { f64::NEG_INFINITY } else { xs[i] };
            let hi = if i == n - 2 { f64::INFINITY } else { xs[i + 1] };
            segments.push(Segment { lo, hi, piece: tilt(i) });
        }
        PiecewiseLogDensity::new(DensitySpec {
            label: label.into(),
            symmetry: Symmetry::None,
            segments,
            family: Family::Custom,
        })
    }
}

/// `g_b(x) = exp(b x - b^2 / 2)`, the Gaussian shifted by `b`.
pub fn make_shifted_gaussian(b: f64) -> Result<PiecewiseLogDensity> {
    if !b.is_finite() {
        return Err(invalid("b", format!("must be finite, got {b}")));
    }
    PiecewiseLogDensity::new(DensitySpec {
        label: format!("g_b(b={b})"),
        symmetry: Symmetry::None,
        segments: vec![Segment {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            piece: Piece::ExpTilt { log_r: 0.0, b },
        }],
        family: Family::ShiftedGaussian { b },
    })
}

/// The product measure `mu x gamma_{n-1}` on `R^n`.
///
/// Entropy, Fisher information and deficit are unchanged; radial moments are
/// bracketed using the triangle inequality for `|x|`.
#[derive(Clone, Debug)]
pub struct TensorizedMeasure {
    pub base: PiecewiseLogDensity,
    pub dimension: usize,
}

pub fn tensorize(base: &PiecewiseLogDensity, dimension: usize) -> Result<TensorizedMeasure> {
    if dimension == 0 {
        return Err(invalid("dimension", "must be at least 1"));
    }
    Ok(TensorizedMeasure { base: base.clone(), dimension })
}
