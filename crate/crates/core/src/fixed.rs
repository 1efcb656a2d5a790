//! Binary fixed-point arithmetic on `BigInt`, used by the spectral oracles.
//!
//! The cosine and Gegenbauer series cancel down to `exp(-pi^2/4t)` at the
//! antipode, so a few hundred bits are needed where `f64` has 53. Inputs are
//! rounded once to `f64` and then treated as exact.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::logvalue::{LogValue, Sign};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Fixed {
    prec: u32,
}

impl Fixed {
    pub fn new(prec: u32) -> Self {
        Fixed { prec }
    }

    /// Working precision for series whose result may be as small as `exp(-pi^2/4t)`.
    pub fn for_time(t: f64, extra: u32) -> Self {
        Fixed::new(128 + extra + (3.6 / t).ceil() as u32)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn one(&self) -> BigInt {
        BigInt::one() << self.prec
    }

    /// Exact for any `f64` whose lowest set bit is at or above `2^-prec`;
    /// truncated toward zero otherwise.
    pub fn from_f64(&self, x: f64) -> BigInt {
        if x == 0.0 {
            return BigInt::zero();
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let shift = e + self.prec as i64;
        let m = BigInt::from(mant);
        let v = if shift >= 0 { m << shift as u64 } else { m >> (-shift) as u64 };
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    pub fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        (a * b) >> self.prec
    }

    /// `a / 2^prec` in log form.
    pub fn to_log(&self, a: &BigInt) -> LogValue {
        if a.is_zero() {
            return LogValue::ZERO;
        }
        let sign = if a.is_negative() { Sign::Negative } else { Sign::Positive };
        let mag = a.abs();
        let nbits = mag.bits();
        let (top, dropped) = if nbits > 64 {
            (mag >> (nbits - 64), nbits - 64)
        } else {
            (mag, 0)
        };
        let top = top.to_f64().expect("at most 64 bits");
        let l = top.ln() + (dropped as f64 - self.prec as f64) * std::f64::consts::LN_2;
        LogValue::new(l, sign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = Fixed::new(200);
        for &x in &[1.0, -0.375, std::f64::consts::PI, 1e-30, 0.999_999_999] {
            let v = f.to_log(&f.from_f64(x));
            assert!((v.to_f64() - x).abs() <= 1e-14 * x.abs(), "{x}");
        }
        assert!(f.to_log(&BigInt::zero()).is_zero());
    }

    #[test]
    fn multiplication() {
        let f = Fixed::new(100);
        let a = f.from_f64(1.5);
        let b = f.from_f64(-2.25);
        assert!((f.to_log(&f.mul(&a, &b)).to_f64() + 3.375).abs() < 1e-14);
    }
}
