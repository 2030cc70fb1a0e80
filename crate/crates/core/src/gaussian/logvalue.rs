use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A real number stored as `sign * exp(log_abs)`.
///
/// Zero is represented by `sign == 0` and `log_abs == -inf`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogValue {
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub log_abs: f64,
    pub sign: i8,
}

/// `ln(1 - exp(-a))` for `a > 0`.
pub fn log1mexp(a: f64) -> f64 {
    if a <= std::f64::consts::LN_2 {
        (-(-a).exp_m1()).ln()
    } else {
        (-(-a).exp()).ln_1p()
    }
}

/// `ln(1 + exp(a))`.
pub fn log1pexp(a: f64) -> f64 {
    if a > 36.0 {
        a + (-a).exp()
    } else {
        a.exp().ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1pexp(lo - hi)
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { log_abs: f64::NEG_INFINITY, sign: 0 };
    pub const ONE: LogValue = LogValue { log_abs: 0.0, sign: 1 };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue { log_abs: x.abs().ln(), sign: if x > 0.0 { 1 } else { -1 } }
        }
    }

    /// The positive number `exp(l)`.
    pub fn from_ln(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { log_abs: l, sign: 1 }
        }
    }

    pub fn with_sign(l: f64, sign: i8) -> Self {
        if sign == 0 || l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { log_abs: l, sign: sign.signum() }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }

    /// Natural log of the absolute value.
    pub fn ln(self) -> f64 {
        self.log_abs
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_positive(self) -> bool {
        self.sign > 0
    }

    pub fn is_finite(self) -> bool {
        self.sign == 0 || self.log_abs.is_finite()
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogValue { log_abs: self.log_abs, sign: 1 }
        }
    }

    /// `|x|^p`.
    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        Self::from_ln(self.log_abs * p)
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(self) -> Self {
        LogValue { log_abs: -self.log_abs, sign: self.sign }
    }

    /// Multiply by `exp(l)`.
    pub fn scale_ln(self, l: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogValue::with_sign(self.log_abs + l, self.sign)
        }
    }

    /// Sum many values with a single rescaling.
    pub fn sum_slice(xs: &[LogValue]) -> LogValue {
        let m = xs
            .iter()
            .filter(|v| v.sign != 0)
            .map(|v| v.log_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        if m == f64::INFINITY {
            let s: i32 = xs.iter().filter(|v| v.log_abs == f64::INFINITY).map(|v| i32::from(v.sign)).sum();
            return LogValue::with_sign(f64::INFINITY, s.signum() as i8);
        }
        let mut pos = 0.0;
        let mut neg = 0.0;
        for v in xs {
            match v.sign {
                1 => pos += (v.log_abs - m).exp(),
                -1 => neg += (v.log_abs - m).exp(),
                _ => {}
            }
        }
        if neg == 0.0 {
            return Self::from_ln(m + pos.ln());
        }
        // keep the subtraction in log space when one side dominates
        let lp = LogValue::from_ln(m + pos.ln());
        let ln = LogValue::from_ln(m + neg.ln());
        lp - ln
    }
}

impl Default for LogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for LogValue {
    fn from(x: f64) -> Self {
        LogValue::from_f64(x)
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            1 => write!(f, "exp({})", self.log_abs),
            _ => write!(f, "-exp({})", self.log_abs),
        }
    }
}

impl PartialEq for LogValue {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.log_abs == other.log_abs)
    }
}

impl PartialOrd for LogValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log_abs.partial_cmp(&other.log_abs),
                _ => other.log_abs.partial_cmp(&self.log_abs),
            },
            o => Some(o),
        }
    }
}

impl Neg for LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        LogValue { log_abs: self.log_abs, sign: -self.sign }
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_abs >= rhs.log_abs { (self, rhs) } else { (rhs, self) };
        if big.log_abs == f64::INFINITY {
            return big;
        }
        let d = small.log_abs - big.log_abs;
        if big.sign == small.sign {
            LogValue { log_abs: big.log_abs + log1pexp(d), sign: big.sign }
        } else if d == 0.0 {
            LogValue::ZERO
        } else {
            LogValue { log_abs: big.log_abs + log1mexp(-d), sign: big.sign }
        }
    }
}

impl Sub for LogValue {
    type Output = LogValue;
    fn sub(self, rhs: LogValue) -> LogValue {
        self + (-rhs)
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 || rhs.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue { log_abs: self.log_abs + rhs.log_abs, sign: self.sign * rhs.sign }
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: LogValue) -> LogValue {
        self * rhs.recip()
    }
}

impl Sum for LogValue {
    fn sum<I: Iterator<Item = LogValue>>(iter: I) -> LogValue {
        let v: Vec<LogValue> = iter.collect();
        LogValue::sum_slice(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn near_cancellation_is_exact_to_rounding() {
        let a = LogValue::from_ln(0.0);
        let b = LogValue::from_ln(-1e-12);
        let d = a - b;
        // 1 - exp(-1e-12) = 1e-12 - 5e-25 + ...
        let expect = 1e-12 - 0.5e-24;
        assert!(((d.to_f64() - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn extreme_magnitudes_do_not_overflow() {
        let a = LogValue::from_ln(1e6);
        let b = LogValue::from_ln(1e6 - 1.0);
        let s = a + b;
        assert!((s.ln() - (1e6 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-9);
        let p = a * b;
        assert_eq!(p.ln(), 2e6 - 1.0);
        assert!((a - a).is_zero());
    }

    #[test]
    fn sum_of_mixed_signs() {
        let xs = [LogValue::from_f64(3.0), LogValue::from_f64(-1.0), LogValue::ZERO, LogValue::from_f64(0.5)];
        assert!((LogValue::sum_slice(&xs).to_f64() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn log1mexp_branches_agree() {
        let a = std::f64::consts::LN_2;
        let l = (-(-a).exp_m1()).ln();
        let r = (-(-a).exp()).ln_1p();
        assert!((l - r).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(x in -1e300f64..1e300f64) {
            let v = LogValue::from_f64(x);
            prop_assert!((v.to_f64() - x).abs() <= 2.0 * f64::EPSILON * x.abs() * (1.0 + x.abs().ln().abs()));
        }

        #[test]
        fn add_matches_f64(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let s = (LogValue::from_f64(a) + LogValue::from_f64(b)).to_f64();
            prop_assert!((s - (a + b)).abs() <= 1e-12 * (a.abs() + b.abs()));
        }

        #[test]
        fn mul_div_inverse(a in -700f64..700.0, b in -700f64..700.0) {
            let x = LogValue::from_ln(a);
            let y = LogValue::from_ln(b).scale_ln(0.0);
            let z = (x * y) / y;
            prop_assert!((z.ln() - a).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
        }
    }
}
