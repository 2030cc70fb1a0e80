use serde::{Deserialize, Serialize};

use super::{DensitySpec, Family, Piece, PiecewiseLogDensity, Segment, Symmetry};
use crate::error::{invalid, Result};
use crate::gaussian::mills_ratio;

/// `f_k = A e^{x^2/2} / (1 + x^2)` on `|x| <= k`, constant beyond; `k = inf`
/// gives the Cauchy law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailParams {
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub k: f64,
    /// `C_k`, with `A = sqrt(2 pi) / (pi C_k)`.
    pub c_k: f64,
}

/// `C_k = (2/pi) (atan k + m(k) / (1 + k^2))`, `m` the Mills ratio.
pub fn heavytail_constant(k: f64) -> f64 {
    let tail = if k.is_finite() { mills_ratio(k) / (1.0 + k * k) } else { 0.0 };
    2.0 / std::f64::consts::PI * (k.atan() + tail)
}

/// `inf_x f_k(x)`.
pub fn heavytail_infimum(k: f64) -> f64 {
    let a = (2.0 * std::f64::consts::PI).sqrt() / (std::f64::consts::PI * heavytail_constant(k));
    let x = k.min(1.0);
    a * (0.5 * x * x).exp() / (1.0 + x * x)
}

pub fn make_heavytail_family(k: f64) -> Result<PiecewiseLogDensity> {
    if !(k > 0.0) {
        return Err(invalid("k", format!("must be > 0 (inf allowed), got {k}")));
    }
    let rational = Piece::Rational { log_amplitude: 0.0 };
    let segments = if k.is_finite() {
        vec![
            Segment { lo: 0.0, hi: k, piece: rational },
            Segment { lo: k, hi: f64::INFINITY, piece: Piece::Flat { log_value: 0.5 * k * k - (k * k).ln_1p() } },
        ]
    } else {
        vec![Segment { lo: 0.0, hi: f64::INFINITY, piece: rational }]
    };
    PiecewiseLogDensity::new(DensitySpec {
        label: format!("heavytail(k={k})"),
        symmetry: Symmetry::Even,
        segments,
        family: Family::HeavyTail(HeavyTailParams { k, c_k: heavytail_constant(k) }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::integrate_gauss;

    #[test]
    fn normalization_constant_matches_scale() {
        for &k in &[0.5, 2.0, 5.0, 10.0, 30.0, f64::INFINITY] {
            let f = make_heavytail_family(k).unwrap();
            let a = (2.0 * std::f64::consts::PI).sqrt() / (std::f64::consts::PI * heavytail_constant(k));
            assert!((f.log_scale() - a.ln()).abs() < 1e-13, "k={k}");
        }
        assert!((heavytail_constant(f64::INFINITY) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let f = make_heavytail_family(3.0).unwrap();
        let mut total = 0.0;
        for (lo, hi) in [(f64::NEG_INFINITY, -3.0), (-3.0, 3.0), (3.0, f64::INFINITY)] {
            total += integrate_gauss(|x| f.evaluate(x), lo, hi, &Default::default()).unwrap().value;
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn infimum_is_attained_at_one() {
        let k = 6.0;
        let f = make_heavytail_family(k).unwrap();
        let grid_min = (0..=6000).map(|i| f.evaluate(i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        assert!((grid_min - heavytail_infimum(k)).abs() < 1e-9);
        assert!((f.evaluate(1.0) - heavytail_infimum(k)).abs() < 1e-14);
    }
}
