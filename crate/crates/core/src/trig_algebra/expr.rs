use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::laurent;
use crate::error::{Error, Result};

/// Exact coefficient type. Always reduced with a positive denominator.
pub type Rational = BigRational;

/// Optional hyperbolic factor `cosh(v z)` or `sinh(v z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hyp {
    None,
    Cosh,
    Sinh,
}

/// Monomial shape `z^pow_z * cos(z)^pow_cos * sin(z)^(-pow_sin_inv) * v^pow_v * hyp(v z)`.
///
/// The derived ordering is the canonical term order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub pow_z: i32,
    pub pow_cos: u32,
    pub pow_sin_inv: u32,
    pub hyp: Hyp,
    pub pow_v: u32,
}

impl TermKey {
    pub const ONE: TermKey = TermKey {
        pow_z: 0,
        pow_cos: 0,
        pow_sin_inv: 0,
        hyp: Hyp::None,
        pow_v: 0,
    };

    pub fn new(pow_z: i32, pow_cos: u32, pow_sin_inv: u32) -> Self {
        TermKey {
            pow_z,
            pow_cos,
            pow_sin_inv,
            ..TermKey::ONE
        }
    }

    pub fn with_hyp(mut self, hyp: Hyp) -> Self {
        self.hyp = hyp;
        self
    }

    fn is_valid(&self) -> bool {
        self.hyp != Hyp::None || self.pow_z >= 0
    }

    /// Parity under `z -> -z`: `true` for even.
    pub fn is_even(&self) -> bool {
        let odd = self.pow_z.rem_euclid(2) as u32 + self.pow_sin_inv + u32::from(self.hyp == Hyp::Sinh);
        odd % 2 == 0
    }
}

/// A single term with its coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub coeff: Rational,
    pub key: TermKey,
}

/// Canonical sum of [`TrigTerm`]s: no two terms share a key, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigExpr {
    terms: BTreeMap<TermKey, Rational>,
}

pub(crate) fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[cfg(test)]
pub(crate) fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

impl TrigExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(rat(1), TermKey::ONE)
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, TermKey::ONE)
    }

    /// # Panics
    /// If `key` has a negative power of `z` without a hyperbolic factor.
    pub fn monomial(coeff: Rational, key: TermKey) -> Self {
        let mut e = Self::zero();
        e.add_term(key, coeff);
        e
    }

    /// `z / sin z`
    pub fn z_over_sin() -> Self {
        Self::monomial(rat(1), TermKey::new(1, 0, 1))
    }

    pub fn inv_sin() -> Self {
        Self::monomial(rat(1), TermKey::new(0, 0, 1))
    }

    pub fn cos() -> Self {
        Self::monomial(rat(1), TermKey::new(0, 1, 0))
    }

    pub fn cosh_vz() -> Self {
        Self::monomial(rat(1), TermKey::ONE.with_hyp(Hyp::Cosh))
    }

    pub fn sinh_vz() -> Self {
        Self::monomial(rat(1), TermKey::ONE.with_hyp(Hyp::Sinh))
    }

    fn add_term(&mut self, key: TermKey, coeff: Rational) {
        assert!(key.is_valid(), "negative power of z requires a hyperbolic factor: {key:?}");
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(c) => {
                *c += coeff;
                if c.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = TrigTerm> + '_ {
        self.terms.iter().map(|(k, c)| TrigTerm {
            coeff: c.clone(),
            key: *k,
        })
    }

    pub(crate) fn raw_terms(&self) -> &BTreeMap<TermKey, Rational> {
        &self.terms
    }

    pub fn has_hyp(&self) -> bool {
        self.terms.keys().any(|k| k.hyp != Hyp::None)
    }

    /// Largest power of `1/sin z` over all terms; bounds the pole order at `E = pi*Z \ {0}`.
    pub fn max_pow_sin_inv(&self) -> u32 {
        self.terms.keys().map(|k| k.pow_sin_inv).max().unwrap_or(0)
    }

    /// Symbolic parity check: every term is even under `z -> -z`.
    pub fn is_even(&self) -> bool {
        self.terms.keys().all(TermKey::is_even)
    }

    /// `d/dz`, with `d/dz cosh(vz) = v sinh(vz)` and `d/dz sinh(vz) = v cosh(vz)`.
    pub fn differentiate(&self) -> TrigExpr {
        let mut out = TrigExpr::zero();
        for (k, c) in &self.terms {
            // z^a
            if k.pow_z != 0 {
                let key = TermKey {
                    pow_z: k.pow_z - 1,
                    ..*k
                };
                out.add_term(key, c * rat(k.pow_z as i64));
            }
            // cos^b -> -b cos^(b-1) sin
            if k.pow_cos > 0 {
                let b = rat(k.pow_cos as i64);
                if k.pow_sin_inv > 0 {
                    let key = TermKey {
                        pow_cos: k.pow_cos - 1,
                        pow_sin_inv: k.pow_sin_inv - 1,
                        ..*k
                    };
                    out.add_term(key, -(c * &b));
                } else {
                    // sin z = (1 - cos^2 z) / sin z keeps the 1/sin exponent nonnegative
                    let lower = TermKey {
                        pow_cos: k.pow_cos - 1,
                        pow_sin_inv: 1,
                        ..*k
                    };
                    let upper = TermKey {
                        pow_cos: k.pow_cos + 1,
                        pow_sin_inv: 1,
                        ..*k
                    };
                    out.add_term(lower, -(c * &b));
                    out.add_term(upper, c * &b);
                }
            }
            // sin^-s -> -s cos sin^-(s+1)
            if k.pow_sin_inv > 0 {
                let key = TermKey {
                    pow_cos: k.pow_cos + 1,
                    pow_sin_inv: k.pow_sin_inv + 1,
                    ..*k
                };
                out.add_term(key, -(c * rat(k.pow_sin_inv as i64)));
            }
            // hyp(vz) -> v hyp'(vz)
            let flipped = match k.hyp {
                Hyp::None => None,
                Hyp::Cosh => Some(Hyp::Sinh),
                Hyp::Sinh => Some(Hyp::Cosh),
            };
            if let Some(h) = flipped {
                let key = TermKey {
                    hyp: h,
                    pow_v: k.pow_v + 1,
                    ..*k
                };
                out.add_term(key, c.clone());
            }
        }
        out
    }

    /// `D = (1/sin z) d/dz`.
    pub fn apply_d(&self) -> TrigExpr {
        self.differentiate().shift(0, 1)
    }

    /// `L = (1/z) d/dz`.
    pub fn apply_l(&self) -> TrigExpr {
        self.differentiate().shift(-1, 0)
    }

    fn shift(&self, dz: i32, dsin: u32) -> TrigExpr {
        let mut out = TrigExpr::zero();
        for (k, c) in &self.terms {
            let key = TermKey {
                pow_z: k.pow_z + dz,
                pow_sin_inv: k.pow_sin_inv + dsin,
                ..*k
            };
            out.add_term(key, c.clone());
        }
        out
    }

    /// Substitutes `v = 1`, merging terms that differ only in their power of `v`.
    pub fn with_unit_scale(&self) -> TrigExpr {
        let mut out = TrigExpr::zero();
        for (k, c) in &self.terms {
            out.add_term(TermKey { pow_v: 0, ..*k }, c.clone());
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> TrigExpr {
        let mut out = TrigExpr::zero();
        for (k, c) in &self.terms {
            out.add_term(*k, c * s);
        }
        out
    }

    pub fn pow(&self, n: u32) -> TrigExpr {
        (0..n).fold(TrigExpr::one(), |acc, _| &acc * self)
    }

    /// Floating evaluation at `z`, with the hyperbolic scale `v` when the
    /// expression carries hyperbolic factors.
    ///
    /// Near `z = 0` removable singularities are resolved through an exact
    /// Laurent expansion truncated after the `z^24` term.
    pub fn eval(&self, z: f64, v: Option<f64>) -> Result<f64> {
        let v = match (self.has_hyp(), v) {
            (true, None) => return Err(Error::domain("hyperbolic factors need a scale v")),
            (true, Some(v)) => v,
            (false, _) => 1.0,
        };
        if self.max_pow_sin_inv() > 0 {
            let k = (z / PI).round();
            if k != 0.0 && (z - k * PI).abs() < 1e-12 * z.abs().max(1.0) {
                return Err(Error::Pole { k: k as i64, z });
            }
        }
        let near_zero = z.abs() < 0.25 && (!self.has_hyp() || (v * z).abs() < 0.25);
        if near_zero && self.needs_series_at_zero() {
            let mut series = laurent::expand_at_zero(self, laurent::DEFAULT_CUT);
            if v == 1.0 {
                series = series.at_unit_scale();
            }
            if series.is_removable() {
                return Ok(series.eval(z, v));
            }
            if z == 0.0 {
                return Err(Error::Pole { k: 0, z });
            }
        }
        Ok(self.eval_termwise(z, v))
    }

    fn needs_series_at_zero(&self) -> bool {
        self.terms.keys().any(|k| k.pow_sin_inv > 0 || k.pow_z < 0)
    }

    /// Direct term-by-term evaluation without any singularity handling.
    pub fn eval_termwise(&self, z: f64, v: f64) -> f64 {
        let (s, c) = z.sin_cos();
        self.terms
            .iter()
            .map(|(k, coeff)| {
                let mut x = coeff.to_f64().unwrap_or(f64::NAN)
                    * z.powi(k.pow_z)
                    * c.powi(k.pow_cos as i32)
                    * s.powi(-(k.pow_sin_inv as i32))
                    * v.powi(k.pow_v as i32);
                x *= match k.hyp {
                    Hyp::None => 1.0,
                    Hyp::Cosh => (v * z).cosh(),
                    Hyp::Sinh => (v * z).sinh(),
                };
                x
            })
            .sum()
    }
}

impl Add for &TrigExpr {
    type Output = TrigExpr;

    fn add(self, rhs: &TrigExpr) -> TrigExpr {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(*k, c.clone());
        }
        out
    }
}

impl Sub for &TrigExpr {
    type Output = TrigExpr;

    fn sub(self, rhs: &TrigExpr) -> TrigExpr {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(*k, -c.clone());
        }
        out
    }
}

impl Neg for &TrigExpr {
    type Output = TrigExpr;

    fn neg(self) -> TrigExpr {
        self.scale(&-Rational::one())
    }
}

/// Product of two expressions.
///
/// # Panics
/// If both factors carry hyperbolic terms; such products leave the term class.
impl Mul for &TrigExpr {
    type Output = TrigExpr;

    fn mul(self, rhs: &TrigExpr) -> TrigExpr {
        let mut out = TrigExpr::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let hyp = match (ka.hyp, kb.hyp) {
                    (Hyp::None, h) | (h, Hyp::None) => h,
                    _ => panic!("product of two hyperbolic factors is outside the term class"),
                };
                let key = TermKey {
                    pow_z: ka.pow_z + kb.pow_z,
                    pow_cos: ka.pow_cos + kb.pow_cos,
                    pow_sin_inv: ka.pow_sin_inv + kb.pow_sin_inv,
                    hyp,
                    pow_v: ka.pow_v + kb.pow_v,
                };
                out.add_term(key, ca * cb);
            }
        }
        out
    }
}

fn fmt_coeff(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for TrigTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = &self.key;
        let sign = if self.coeff.is_negative() { "-" } else { "+" };
        write!(f, "{sign} {}", fmt_coeff(&self.coeff.abs()))?;
        if k.pow_z != 0 {
            write!(f, " * z^{}", k.pow_z)?;
        }
        if k.pow_cos != 0 {
            write!(f, " * cos(z)^{}", k.pow_cos)?;
        }
        if k.pow_sin_inv != 0 {
            write!(f, " * sin(z)^-{}", k.pow_sin_inv)?;
        }
        if k.pow_v != 0 {
            write!(f, " * v^{}", k.pow_v)?;
        }
        match k.hyp {
            Hyp::None => Ok(()),
            Hyp::Cosh => write!(f, " * cosh(v z)"),
            Hyp::Sinh => write!(f, " * sinh(v z)"),
        }
    }
}

/// One term per line; the zero expression prints as `0`.
impl fmt::Display for TrigExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return writeln!(f, "0");
        }
        for t in self.terms() {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn derivative_of_z_over_sin() {
        let d = TrigExpr::z_over_sin().differentiate();
        let expected = &TrigExpr::inv_sin()
            - &TrigExpr::monomial(rat(1), TermKey::new(1, 1, 2));
        assert_eq!(d, expected);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        assert!(TrigExpr::one().differentiate().is_zero());
        assert!(TrigExpr::one().apply_d().is_zero());
    }

    #[test]
    fn derivative_of_cosh() {
        let d = TrigExpr::cosh_vz().differentiate();
        let expected = TrigExpr::monomial(
            rat(1),
            TermKey {
                pow_v: 1,
                ..TermKey::ONE.with_hyp(Hyp::Sinh)
            },
        );
        assert_eq!(d, expected);
    }

    #[test]
    fn apply_d_of_cos_is_minus_one() {
        let d = TrigExpr::cos().apply_d();
        // -sin z / sin z, written as -(1 - cos^2)/sin^2; evaluates to -1 everywhere
        for z in [0.3, 1.0, 2.0, -2.5] {
            assert!(close(d.eval(z, None).unwrap(), -1.0, 1e-14));
        }
    }

    #[test]
    fn apply_d_of_z_over_sin() {
        let d = TrigExpr::z_over_sin().apply_d();
        let expected = &TrigExpr::monomial(rat(1), TermKey::new(0, 0, 2))
            - &TrigExpr::monomial(rat(1), TermKey::new(1, 1, 3));
        assert_eq!(d, expected);
        // finite-difference check of (1/sin z) d/dz (z/sin z)
        let f = |z: f64| z / z.sin();
        for z in [0.4, 1.1, 2.3] {
            let h = 1e-6;
            let fd = (f(z + h) - f(z - h)) / (2.0 * h) / z.sin();
            assert!(close(d.eval(z, None).unwrap(), fd, 1e-8));
        }
    }

    #[test]
    fn removable_singularity_at_zero() {
        let e = TrigExpr::z_over_sin();
        assert!((e.eval(1e-9, None).unwrap() - 1.0).abs() < 1e-15);
        assert!((e.eval(0.0, None).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn genuine_pole_reports_lattice_point() {
        let e = TrigExpr::inv_sin();
        assert_eq!(e.eval(2.0 * PI, None).unwrap_err(), Error::Pole { k: 2, z: 2.0 * PI });
        assert!(matches!(e.eval(0.0, None), Err(Error::Pole { k: 0, .. })));
    }

    #[test]
    fn sinh_over_z_direct() {
        let e = TrigExpr::monomial(rat(1), TermKey { pow_z: -1, ..TermKey::ONE.with_hyp(Hyp::Sinh) });
        assert!(close(e.eval(2.0, Some(1.0)).unwrap(), 2f64.sinh() / 2.0, 1e-15));
        assert!(close(e.eval(1e-8, Some(1.0)).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn hyperbolic_eval_requires_scale() {
        assert!(TrigExpr::cosh_vz().eval(1.0, None).is_err());
    }

    #[test]
    fn display_one_term_per_line() {
        let e = TrigExpr::z_over_sin().apply_d();
        let s = e.to_string();
        assert_eq!(s.lines().count(), 2);
        assert!(s.contains("+ 1 * sin(z)^-2"));
        assert!(s.contains("- 1 * z^1 * cos(z)^1 * sin(z)^-3"));
    }

    #[test]
    fn parity() {
        assert!(TrigExpr::z_over_sin().is_even());
        assert!(!TrigExpr::inv_sin().is_even());
        assert!(TrigExpr::cosh_vz().is_even());
    }
}
