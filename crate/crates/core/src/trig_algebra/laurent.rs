//! Exact Laurent expansions at `z = 0`, used to evaluate expressions whose
//! individual terms are singular at the origin while their sum is not.

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};

use super::expr::{rat, Hyp, Rational, TrigExpr};

/// Default truncation: keep powers of `z` up to and including `z^24`
/// (twelve even Taylor terms past the constant).
pub const DEFAULT_CUT: i64 = 24;

/// Coefficients keyed by `(power of z, power of v)`.
#[derive(Debug, Clone, Default)]
pub struct ZeroSeries {
    coeffs: BTreeMap<(i64, u32), Rational>,
}

impl ZeroSeries {
    /// True when every negative power of `z` cancels exactly.
    pub fn is_removable(&self) -> bool {
        self.coeffs.keys().all(|&(k, _)| k >= 0)
    }

    /// Substitutes `v = 1`, merging coefficients across powers of `v`.
    pub fn at_unit_scale(&self) -> ZeroSeries {
        let mut out = ZeroSeries::default();
        for (&(k, _), c) in &self.coeffs {
            out.add((k, 0), c.clone());
        }
        out
    }

    pub fn coeff(&self, zpow: i64, vpow: u32) -> Rational {
        self.coeffs.get(&(zpow, vpow)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn eval(&self, z: f64, v: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(&(k, p), c)| c.to_f64().unwrap_or(f64::NAN) * z.powi(k as i32) * v.powi(p as i32))
            .sum()
    }

    fn add(&mut self, key: (i64, u32), c: Rational) {
        let e = self.coeffs.entry(key).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    fn mul_dense(&self, dense: &[Rational], cut: i64) -> ZeroSeries {
        let mut out = ZeroSeries::default();
        for (&(k, p), c) in &self.coeffs {
            for (i, d) in dense.iter().enumerate() {
                let zk = k + i as i64;
                if zk > cut {
                    break;
                }
                if !d.is_zero() {
                    out.add((zk, p), c * d);
                }
            }
        }
        out
    }

    fn mul(&self, other: &ZeroSeries, cut: i64) -> ZeroSeries {
        let mut out = ZeroSeries::default();
        for (&(ka, pa), ca) in &self.coeffs {
            for (&(kb, pb), cb) in &other.coeffs {
                if ka + kb <= cut {
                    out.add((ka + kb, pa + pb), ca * cb);
                }
            }
        }
        out
    }
}

fn factorial(n: usize) -> Rational {
    (1..=n as i64).fold(rat(1), |acc, k| acc * rat(k))
}

/// `cos z` coefficients for `z^0 ..= z^n`.
pub(crate) fn cos_series(n: usize) -> Vec<Rational> {
    (0..=n)
        .map(|i| {
            if i % 2 == 1 {
                Rational::zero()
            } else {
                let s = if (i / 2) % 2 == 0 { rat(1) } else { rat(-1) };
                s / factorial(i)
            }
        })
        .collect()
}

/// `z / sin z` coefficients for `z^0 ..= z^n`, by inverting `sin z / z`.
pub(crate) fn z_over_sin_series(n: usize) -> Vec<Rational> {
    let sinc: Vec<Rational> = (0..=n)
        .map(|i| {
            if i % 2 == 1 {
                Rational::zero()
            } else {
                let s = if (i / 2) % 2 == 0 { rat(1) } else { rat(-1) };
                s / factorial(i + 1)
            }
        })
        .collect();
    let mut inv = vec![Rational::zero(); n + 1];
    inv[0] = rat(1);
    for i in (2..=n).step_by(2) {
        let mut acc = Rational::zero();
        for j in (2..=i).step_by(2) {
            acc += &sinc[j] * &inv[i - j];
        }
        inv[i] = -acc;
    }
    inv
}

fn dense_pow(base: &[Rational], e: u32, n: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); n + 1];
    out[0] = rat(1);
    for _ in 0..e {
        let mut next = vec![Rational::zero(); n + 1];
        for (i, a) in out.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in base.iter().enumerate().take(n + 1 - i) {
                next[i + j] += a * b;
            }
        }
        out = next;
    }
    out
}

/// Expands every term of `expr` around `z = 0`, keeping powers up to `cut`.
pub fn expand_at_zero(expr: &TrigExpr, cut: i64) -> ZeroSeries {
    let mut total = ZeroSeries::default();
    for (k, c) in expr.raw_terms() {
        let lead = k.pow_z as i64 - k.pow_sin_inv as i64;
        let width = (cut - lead).max(0) as usize;
        let mut s = ZeroSeries::default();
        s.add((lead, k.pow_v), c.clone());
        if k.pow_cos > 0 {
            s = s.mul_dense(&dense_pow(&cos_series(width), k.pow_cos, width), cut);
        }
        if k.pow_sin_inv > 0 {
            s = s.mul_dense(&dense_pow(&z_over_sin_series(width), k.pow_sin_inv, width), cut);
        }
        if k.hyp != Hyp::None {
            let start = usize::from(k.hyp == Hyp::Sinh);
            let mut h = ZeroSeries::default();
            for i in (start..=width).step_by(2) {
                h.add((i as i64, i as u32), rat(1) / factorial(i));
            }
            s = s.mul(&h, cut);
        }
        for (key, c) in s.coeffs {
            total.add(key, c);
        }
    }
    total
}
