//! Signed log-domain scalars.
//!
//! Kernel values at small times reach magnitudes like `exp(-24000)`, far below
//! the smallest positive `f64`. A [`LogValue`] keeps the natural logarithm of
//! the magnitude together with a sign, and [`LogSum`] accumulates signed terms
//! with a running max-shift so that neither overflow nor underflow occurs.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Mul, Neg};

/// Sign of a [`LogValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_i8() as f64
    }

    fn flip(self) -> Self {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    fn times(self, other: Sign) -> Sign {
        match (self, other) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

/// A real number stored as `sign * exp(log_abs)`.
///
/// Invariant: `sign == Sign::Zero` iff `log_abs == -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    log_abs: f64,
    sign: Sign,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_abs: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };

    pub const ONE: LogValue = LogValue {
        log_abs: 0.0,
        sign: Sign::Positive,
    };

    /// Builds a value from its parts. A `-inf` magnitude forces the zero sign
    /// and a zero sign forces the `-inf` magnitude.
    pub fn new(log_abs: f64, sign: Sign) -> Self {
        if sign == Sign::Zero || log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { log_abs, sign }
        }
    }

    pub fn positive(log_abs: f64) -> Self {
        Self::new(log_abs, Sign::Positive)
    }

    pub fn from_f64(x: f64) -> Self {
        if x > 0.0 {
            Self::positive(x.ln())
        } else if x < 0.0 {
            Self::new((-x).ln(), Sign::Negative)
        } else {
            Self::ZERO
        }
    }

    pub fn log_abs(&self) -> f64 {
        self.log_abs
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    /// Linear value; underflows to `±0.0` and overflows to `±inf`.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.log_abs.exp(),
        }
    }

    /// Multiplies by `exp(delta)`.
    pub fn scale_log(self, delta: f64) -> Self {
        Self::new(self.log_abs + delta, self.sign)
    }

    pub fn abs(self) -> Self {
        Self::new(self.log_abs, if self.is_zero() { Sign::Zero } else { Sign::Positive })
    }

    /// Relative difference `|a - b| / |b|` computed without leaving log space
    /// when both values share a sign.
    pub fn rel_diff(&self, other: &LogValue) -> f64 {
        match (self.sign, other.sign) {
            (Sign::Zero, Sign::Zero) => 0.0,
            (a, b) if a == b => (self.log_abs - other.log_abs).exp_m1().abs(),
            _ => f64::INFINITY,
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue::new(self.log_abs + rhs.log_abs, self.sign.times(rhs.sign))
    }
}

impl Neg for LogValue {
    type Output = LogValue;

    fn neg(self) -> LogValue {
        LogValue::new(self.log_abs, self.sign.flip())
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}exp({})", if self.sign == Sign::Negative { "-" } else { "" }, self.log_abs)
    }
}

/// One-signed running sum of `exp(x_i)` with a max shift.
#[derive(Debug, Clone, Copy)]
struct ShiftedSum {
    max: f64,
    scaled: f64,
}

impl ShiftedSum {
    const EMPTY: ShiftedSum = ShiftedSum {
        max: f64::NEG_INFINITY,
        scaled: 0.0,
    };

    fn push(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.scaled += (log_term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    fn log(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Signed log-sum-exp accumulator.
///
/// Positive and negative contributions are kept apart and combined once at
/// the end, so cancellation is confined to a single subtraction.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    pos: ShiftedSum,
    neg: ShiftedSum,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        LogSum {
            pos: ShiftedSum::EMPTY,
            neg: ShiftedSum::EMPTY,
        }
    }

    pub fn push(&mut self, v: LogValue) {
        match v.sign {
            Sign::Positive => self.pos.push(v.log_abs),
            Sign::Negative => self.neg.push(v.log_abs),
            Sign::Zero => {}
        }
    }

    pub fn push_log(&mut self, log_abs: f64) {
        self.pos.push(log_abs);
    }

    /// Log of the largest magnitude seen on either side so far (an upper
    /// bound scale for cancellation estimates).
    pub fn max_log(&self) -> f64 {
        self.pos.log().max(self.neg.log())
    }

    pub fn value(&self) -> LogValue {
        let lp = self.pos.log();
        let ln = self.neg.log();
        if lp == ln {
            return LogValue::ZERO;
        }
        if lp > ln {
            LogValue::positive(lp + (-(ln - lp).exp()).ln_1p())
        } else {
            LogValue::new(ln + (-(lp - ln).exp()).ln_1p(), Sign::Negative)
        }
    }
}

impl FromIterator<LogValue> for LogSum {
    fn from_iter<I: IntoIterator<Item = LogValue>>(iter: I) -> Self {
        let mut s = LogSum::new();
        for v in iter {
            s.push(v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_invariant() {
        assert!(LogValue::new(f64::NEG_INFINITY, Sign::Positive).is_zero());
        assert_eq!(LogValue::new(3.0, Sign::Zero), LogValue::ZERO);
        assert_eq!(LogValue::from_f64(0.0).sign(), Sign::Zero);
    }

    #[test]
    fn signed_sum_matches_linear() {
        let xs = [3.5, -1.25, 0.125, -2.0, 7.0];
        let s: LogSum = xs.iter().map(|&x| LogValue::from_f64(x)).collect();
        assert!((s.value().to_f64() - xs.iter().sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn sum_survives_extreme_exponents() {
        let mut s = LogSum::new();
        s.push(LogValue::positive(-30000.0));
        s.push(LogValue::positive(-30000.0));
        assert!((s.value().log_abs() - (-30000.0 + 2f64.ln())).abs() < 1e-12);
        s.push(LogValue::new(-30000.0 + 2f64.ln(), Sign::Negative));
        assert!(s.value().is_zero());
    }

    #[test]
    fn negative_result() {
        let s: LogSum = [1.0, -3.0].iter().map(|&x| LogValue::from_f64(x)).collect();
        let v = s.value();
        assert_eq!(v.sign(), Sign::Negative);
        assert!((v.to_f64() + 2.0).abs() < 1e-15);
    }
}
