use serde::{Deserialize, Serialize};

use super::{internal_cfg, Bridge, BridgeShape, DensitySpec, Family, Piece, PiecewiseLogDensity, Segment, Symmetry};
use crate::error::{invalid, Result};
use crate::gaussian::{log_sf, LogValue};

/// Parameters of the bump `f_{s,t,k}`: flat `1` up to `k - d`, a bridge down to `r`,
/// then the tilt `r exp(b x - b^2/2)` with `b = 2k`, mirrored and normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub s: f64,
    pub t: f64,
    pub k: f64,
    pub shape: BridgeShape,
    /// `min(s k^-t, 1) / 4`.
    pub r: f64,
    /// Bridge width `1 / (2k)`.
    pub d: f64,
    /// Tilt `2k`.
    pub b: f64,
    /// Unnormalized mass minus `1 + 2r`; exponentially small in `k`.
    pub norm_excess: LogValue,
}

impl BumpParams {
    pub fn new(s: f64, t: f64, k: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid("s", format!("must be finite and > 0, got {s}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be finite and > 0, got {t}")));
        }
        if !(k >= 2.0 && k.is_finite()) {
            return Err(invalid("k", format!("must be finite and >= 2, got {k}")));
        }
        let r = 0.25 * (s * k.powf(-t)).min(1.0);
        Ok(BumpParams { s, t, k, shape: BridgeShape::Quintic, r, d: 0.5 / k, b: 2.0 * k, norm_excess: LogValue::ZERO })
    }

    /// Unnormalized mass `1 + 2r + 2 * excess`.
    pub fn norm(&self) -> f64 {
        1.0 + 2.0 * self.r + 2.0 * self.norm_excess.to_f64()
    }

    pub fn bridge(&self) -> Bridge {
        Bridge { x0: self.k - self.d, x1: self.k, y0: 1.0, y1: self.r, shape: self.shape }
    }
}

pub fn make_bump_family(s: f64, t: f64, k: f64) -> Result<PiecewiseLogDensity> {
    make_bump_family_with(s, t, k, BridgeShape::Quintic)
}

pub fn make_bump_family_with(s: f64, t: f64, k: f64, shape: BridgeShape) -> Result<PiecewiseLogDensity> {
    let mut p = BumpParams::new(s, t, k)?;
    p.shape = shape;
    let bridge = Piece::Bridge(p.bridge());
    let bridge_mass = bridge.mass(k - p.d, k, &internal_cfg())?;
    // per side: bridge - Q(k - d) - r Q(b - k)
    p.norm_excess = bridge_mass
        - LogValue::from_ln(log_sf(k - p.d))
        - LogValue::from_ln(p.r.ln() + log_sf(p.b - k));
    let segments = vec![
        Segment { lo: 0.0, hi: k - p.d, piece: Piece::Flat { log_value: 0.0 } },
        Segment { lo: k - p.d, hi: k, piece: bridge },
        Segment { lo: k, hi: f64::INFINITY, piece: Piece::ExpTilt { log_r: p.r.ln(), b: p.b } },
    ];
    PiecewiseLogDensity::new(DensitySpec {
        label: format!("bump s={s} t={t} k={k}"),
        symmetry: Symmetry::Even,
        segments,
        family: Family::Bump(p),
    })
}
