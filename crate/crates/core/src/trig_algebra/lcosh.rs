//! `L^j(cosh)` with `L = (1/z) d/dz`, symbolically and numerically, and the
//! derivatives `D_z^k cosh(vz)` assembled from it and the `Phi` tables.

use std::sync::OnceLock;

use num_traits::ToPrimitive;

use super::expr::{Hyp, TrigExpr};
use super::phi::{PhiCache, PhiValues, MAX_ORDER};
use crate::error::{Error, Result};
use crate::logvalue::{LogSum, LogValue};

/// Exact `L^j(cosh)` as a combination of `z^{-m} cosh z` and `z^{-m} sinh z`.
pub fn l_cosh(j: usize) -> Result<TrigExpr> {
    let cap = PhiCache::global().cap();
    if j > cap {
        return Err(Error::Capability {
            what: format!("L^j(cosh) order {j}"),
            cap,
        });
    }
    Ok(build_l_cosh(j))
}

fn build_l_cosh(j: usize) -> TrigExpr {
    let mut e = TrigExpr::cosh_vz();
    for _ in 0..j {
        e = e.apply_l();
    }
    e.with_unit_scale()
}

/// `L^j cosh(x) = e^x P_j(1/x)/2 + e^{-x} Q_j(1/x)/2` for `x > 0`.
struct Asymptotic {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl Asymptotic {
    fn new(j: usize) -> Self {
        let e = build_l_cosh(j);
        let n = e.terms().map(|t| (-t.key.pow_z) as usize).max().unwrap_or(0);
        let mut p = vec![0.0; n + 1];
        let mut q = vec![0.0; n + 1];
        for t in e.terms() {
            let m = (-t.key.pow_z) as usize;
            let c = t.coeff.to_f64().unwrap();
            p[m] += c;
            match t.key.hyp {
                Hyp::Cosh => q[m] += c,
                Hyp::Sinh => q[m] -= c,
                Hyp::None => unreachable!("L^j(cosh) has only hyperbolic terms"),
            }
        }
        Asymptotic { p, q }
    }
}

fn horner(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * y + a)
}

fn tables() -> &'static [Asymptotic] {
    static T: OnceLock<Vec<Asymptotic>> = OnceLock::new();
    T.get_or_init(|| (0..=MAX_ORDER).map(Asymptotic::new).collect())
}

fn series_limit(j: usize) -> f64 {
    (2 * j * j).max(30) as f64
}

/// `log(e^{-x} L^j cosh(x))` for `x >= 0`.
///
/// The power series has positive coefficients, so it is summed directly
/// (with rescaling) up to `x ~ 2 j^2`; past that the closed form is used,
/// where its terms decay like `(j^2/x)^m`.
pub fn log_l_cosh_scaled(j: usize, x: f64) -> f64 {
    debug_assert!(x >= 0.0 && j <= MAX_ORDER);
    if j == 0 {
        return (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2;
    }
    if x <= series_limit(j) {
        return log_series(j, x) - x;
    }
    let a = &tables()[j];
    let y = 1.0 / x;
    let val = 0.5 * horner(&a.p, y) + 0.5 * (-2.0 * x).exp() * horner(&a.q, y);
    val.ln()
}

fn log_series(j: usize, x: f64) -> f64 {
    const RESCALE: f64 = 1e280;
    let x2 = x * x;
    // c_0 = 1/(2j-1)!!
    let mut term = (1..j).fold(1.0, |acc, i| acc / (2 * i + 1) as f64);
    let mut sum = term;
    let mut shift = 0.0;
    let mut m = 0usize;
    loop {
        term *= x2 / (2.0 * (m + 1) as f64 * (2 * m + 2 * j + 1) as f64);
        sum += term;
        m += 1;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            shift += RESCALE.ln();
        }
        // past the peak the ratio is below 1/4, so the tail is under term/3
        if term < sum * 1e-17 && 2 * m > x as usize {
            break;
        }
    }
    sum.ln() + shift
}

/// `log D_x^k cosh(vx)` for `v > 0`, `0 <= x < pi`, using precomputed `Phi`
/// values at `x`. Every summand is positive there.
pub fn log_dk_cosh(k: usize, v: f64, x: f64, phi: &PhiValues) -> f64 {
    let vx = v * x;
    if k == 0 {
        return vx + log_l_cosh_scaled(0, vx);
    }
    let lv2 = 2.0 * v.ln();
    let mut acc = LogSum::new();
    for j in 1..=k {
        let ph = phi.get(k, j);
        acc.push_log(j as f64 * lv2 + log_l_cosh_scaled(j, vx) + ph.ln());
    }
    vx + acc.value().log_abs()
}

/// `D_z^k cosh(vz)` in log form, building the `Phi` values internally.
pub fn dk_cosh(k: usize, v: f64, z: f64) -> Result<LogValue> {
    if !(0.0..std::f64::consts::PI).contains(&z.abs()) {
        return Err(Error::domain(format!("z = {z} outside (-pi, pi)")));
    }
    if v <= 0.0 {
        return Err(Error::domain("v must be positive"));
    }
    let stack = PhiCache::global().stack(k)?;
    let phi = stack.values_at(z.abs());
    // D maps even functions to even functions
    Ok(LogValue::positive(log_dk_cosh(k, v, z.abs(), &phi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig_algebra::expr::{rat, rat_frac, TermKey};

    fn l_cosh_direct(j: usize, x: f64) -> f64 {
        l_cosh(j).unwrap().eval(x, Some(1.0)).unwrap()
    }

    #[test]
    fn low_orders_symbolic() {
        assert_eq!(l_cosh(0).unwrap(), TrigExpr::cosh_vz());
        let sinh_over_z = TrigExpr::monomial(rat(1), TermKey::new(-1, 0, 0).with_hyp(Hyp::Sinh));
        assert_eq!(l_cosh(1).unwrap(), sinh_over_z);
        let two = &TrigExpr::monomial(rat(1), TermKey::new(-2, 0, 0).with_hyp(Hyp::Cosh))
            - &TrigExpr::monomial(rat(1), TermKey::new(-3, 0, 0).with_hyp(Hyp::Sinh));
        assert_eq!(l_cosh(2).unwrap(), two);
    }

    #[test]
    fn limits_at_zero() {
        assert!((l_cosh_direct(1, 1e-9) - 1.0).abs() < 1e-15);
        assert!((l_cosh_direct(2, 1e-6) - 1.0 / 3.0).abs() < 1e-12);
        let s = crate::trig_algebra::laurent::expand_at_zero(&l_cosh(2).unwrap(), 4).at_unit_scale();
        assert_eq!(s.coeff(0, 0), rat_frac(1, 3));
    }

    #[test]
    fn cap_is_enforced() {
        assert!(l_cosh(PhiCache::global().cap() + 1).is_err());
    }

    // L^j cosh(x) = sum_{k>=j} 2^j k! / ((k-j)! (2k)!) x^{2(k-j)}, term by term
    fn l_cosh_taylor(j: usize, x: f64) -> f64 {
        let fact = |n: usize| (1..=n).fold(1.0, |a, i| a * i as f64);
        (j..j + 60)
            .map(|k| 2f64.powi(j as i32) * fact(k) / (fact(k - j) * fact(2 * k)) * x.powi(2 * (k - j) as i32))
            .sum()
    }

    #[test]
    fn scaled_forms_agree_with_direct_evaluation() {
        for j in 0..=6 {
            for &x in &[0.0, 0.3, 1.0, 4.0, 17.0, 29.0, 31.0, 60.0, 150.0] {
                let got = log_l_cosh_scaled(j, x);
                let want = if x < 10.0 {
                    l_cosh_taylor(j, x).ln() - x
                } else {
                    l_cosh_direct(j, x).ln() - x
                };
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "j={j} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn series_and_closed_form_meet() {
        for j in 1..=MAX_ORDER {
            let x = series_limit(j);
            let a = log_series(j, x) - x;
            let b = log_l_cosh_scaled(j, x * (1.0 + 1e-15));
            assert!((a - b).abs() < 1e-11, "j={j}: {a} vs {b}");
        }
    }

    #[test]
    fn third_order_is_positive_and_below_exp() {
        for i in 1..=50 {
            let x = 0.1 * i as f64;
            let v = l_cosh_direct(3, x);
            assert!(v > 0.0 && v <= x.exp());
        }
    }

    #[test]
    fn dk_cosh_matches_symbolic_d() {
        // D^2 cosh(vz) built by applying D to the hyperbolic expression directly
        let v = 3.0;
        let e = TrigExpr::cosh_vz().apply_d().apply_d();
        for &z in &[0.4, 1.2, 2.5] {
            let want = e.eval(z, Some(v)).unwrap();
            let got = dk_cosh(2, v, z).unwrap().to_f64();
            assert!((got - want).abs() < 1e-12 * want.abs(), "{got} vs {want}");
        }
        let e1 = TrigExpr::cosh_vz().apply_d();
        let got = dk_cosh(1, v, -1.0).unwrap().to_f64();
        assert!((got - e1.eval(-1.0, Some(v)).unwrap()).abs() < 1e-12);
    }
}
