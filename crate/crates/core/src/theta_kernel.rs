//! The periodized Gauss-Weierstrass kernel `theta_t(phi) = sum_n W_t(phi + 2 pi n)`
//! (the heat kernel of the circle) and its images `H^N theta_t` under
//! `H = -(1/sin phi) d/dphi`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::logvalue::{LogSum, LogValue, Sign};
use crate::trig_algebra::{log_dk_cosh, PhiCache, PhiValues};

const TWO_PI: f64 = 2.0 * PI;
const MIN_LATTICE_TERMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaConfig {
    /// Relative truncation threshold for the lattice sums.
    pub eps_rel: f64,
    /// The antipodal representation is used when `pi - phi < regime_switch`.
    pub regime_switch: f64,
    /// Range of `pi - phi` where both representations are compared in tests.
    pub overlap_band: (f64, f64),
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig {
            eps_rel: 1e-15,
            regime_switch: 1.0,
            overlap_band: (0.5, 1.5),
        }
    }
}

impl ThetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_rel > 0.0 && self.eps_rel <= 1e-6) {
            return Err(Error::domain(format!("theta eps_rel {} outside (0, 1e-6]", self.eps_rel)));
        }
        if !(self.regime_switch > 0.0 && self.regime_switch < PI) {
            return Err(Error::domain(format!("regime_switch {} outside (0, pi)", self.regime_switch)));
        }
        let (a, b) = self.overlap_band;
        if !(0.0 < a && a <= b && b < PI) {
            return Err(Error::domain("overlap_band must satisfy 0 < a <= b < pi"));
        }
        Ok(())
    }
}

/// Which exact representation [`hn_theta`] sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Lattice terms paired around `phi`.
    Bulk,
    /// Lattice terms paired around the antipode, in `psi = pi - phi`.
    Antipodal,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be positive and finite, got {t}")))
    }
}

/// Representative of `phi` in `[0, pi]` under evenness and `2 pi` periodicity.
pub fn reduce_angle(phi: f64) -> f64 {
    // abs first so that phi and -phi reduce identically
    let r = phi.abs().rem_euclid(TWO_PI);
    if r > PI {
        TWO_PI - r
    } else {
        r
    }
}

/// `log W_t(x)` with `W_t(x) = exp(-x^2/4t) / sqrt(4 pi t)`.
pub fn gauss_w(t: f64, x: f64) -> Result<LogValue> {
    check_time(t)?;
    Ok(LogValue::positive(log_w(t, x)))
}

#[inline]
fn log_w(t: f64, x: f64) -> f64 {
    -x * x / (4.0 * t) - 0.5 * (4.0 * PI * t).ln()
}

/// `theta_t(phi)` with the default truncation.
pub fn theta(t: f64, phi: f64) -> Result<LogValue> {
    theta_eps(t, phi, ThetaConfig::default().eps_rel)
}

/// `theta_t(phi) = W_t(phi0) (1 + sum_{n != 0} exp(-pi n (phi0 + pi n)/t))`
/// with `phi0` the representative of `phi` in `[0, pi]`.
pub fn theta_eps(t: f64, phi: f64, eps_rel: f64) -> Result<LogValue> {
    check_time(t)?;
    let p = reduce_angle(phi);
    let mut corr = 0.0;
    let mut n = 1usize;
    loop {
        let a = PI * n as f64;
        let right = (-a * (p + a) / t).exp();
        let left = (-a * (a - p) / t).exp();
        corr += right + left;
        if n >= 2 && left + right <= eps_rel * (1.0 + corr) {
            break;
        }
        n += 1;
    }
    Ok(LogValue::positive(log_w(t, p) + corr.ln_1p()))
}

/// Result of [`theta_dual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualValue {
    pub value: LogValue,
    pub terms: usize,
    /// Set for `t < 0.05`, where the series needs many terms and cancels heavily.
    pub warning: bool,
}

/// `(1/2 pi)(1 + 2 sum_{n>=1} exp(-n^2 t) cos(n phi))`, summed in fixed point
/// from the rounded inputs `exp(-t)` and `cos(phi)`.
pub fn theta_dual(t: f64, phi: f64) -> Result<DualValue> {
    check_time(t)?;
    let fx = Fixed::for_time(t, 16);
    let q = fx.from_f64((-t).exp());
    let c = fx.from_f64(reduce_angle(phi).cos());
    let stop = (fx.prec() as f64 + 16.0) * std::f64::consts::LN_2;

    let mut sum = fx.one();
    let (mut t_prev, mut t_cur) = (fx.one(), c.clone());
    let q2 = fx.mul(&q, &q);
    // pw = q^{n^2}, step = q^{2n+1}
    let mut pw = q.clone();
    let mut step = fx.mul(&q2, &q);
    let mut n = 1usize;
    loop {
        sum += fx.mul(&pw, &t_cur) << 1u32;
        if ((n + 1) * (n + 1)) as f64 * t > stop {
            break;
        }
        pw = fx.mul(&pw, &step);
        step = fx.mul(&step, &q2);
        let next = (fx.mul(&c, &t_cur) << 1u32) - &t_prev;
        t_prev = std::mem::replace(&mut t_cur, next);
        n += 1;
    }
    Ok(DualValue {
        value: fx.to_log(&sum).scale_log(-TWO_PI.ln()),
        terms: n,
        warning: t < 0.05,
    })
}

fn check_order(n: usize) -> Result<()> {
    let cap = PhiCache::global().cap();
    if n > cap {
        return Err(Error::Capability {
            what: format!("operator power N = {n}"),
            cap,
        });
    }
    Ok(())
}

/// `S_m(x) = sum_j (-1)^{m+j} (2t)^{-j} Phi_{m,j}(x)`, so that `H^m W_t = W_t S_m`.
fn s_factor(t: f64, m: usize, phi: &PhiValues) -> LogValue {
    if m == 0 {
        return LogValue::ONE;
    }
    let l2t = (2.0 * t).ln();
    let mut acc = LogSum::new();
    for j in 1..=m {
        let v = phi.get(m, j);
        let sign = match ((m + j) % 2 == 0, v >= 0.0) {
            (true, true) | (false, false) => Sign::Positive,
            _ => Sign::Negative,
        };
        acc.push(LogValue::new(v.abs().ln() - j as f64 * l2t, sign));
    }
    acc.value()
}

/// `H^N W_t(psi) = W_t(psi) sum_{j=1}^N (-1)^{N+j} (2t)^{-j} Phi_{N,j}(psi)`.
pub fn hn_w(t: f64, psi: f64, n: usize) -> Result<LogValue> {
    check_time(t)?;
    check_order(n)?;
    if n > 0 {
        let k = (psi / PI).round();
        if k != 0.0 && (psi - k * PI).abs() < 1e-12 {
            return Err(Error::Pole { k: k as i64, z: psi });
        }
    }
    if n == 0 {
        return gauss_w(t, psi);
    }
    let stack = PhiCache::global().stack(n)?;
    // Phi_{m,j} is even
    let phi = stack.values_at(psi.abs());
    Ok(s_factor(t, n, &phi).scale_log(log_w(t, psi)))
}

fn binomials(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

/// Regime chosen by [`hn_theta`] for angle `phi` in `[0, pi]`.
pub fn regime_for(phi: f64, cfg: &ThetaConfig) -> Regime {
    if PI - phi < cfg.regime_switch {
        Regime::Antipodal
    } else {
        Regime::Bulk
    }
}

/// `H^N theta_t(phi)` for `phi` in `[0, pi]`; positive for every `t` and `N`.
pub fn hn_theta(t: f64, phi: f64, n: usize, cfg: &ThetaConfig) -> Result<LogValue> {
    if n == 0 {
        check_angle(phi)?;
        return theta_eps(t, phi, cfg.eps_rel);
    }
    hn_theta_in(regime_for(phi, cfg), t, phi, n, cfg)
}

fn check_angle(phi: f64) -> Result<()> {
    if (0.0..=PI).contains(&phi) {
        Ok(())
    } else {
        Err(Error::domain(format!("angle {phi} outside [0, pi]")))
    }
}

/// `H^N theta_t(phi)` through a chosen representation.
///
/// Bulk: `theta_t = W_t(phi) [1 + sum_{n>=1} 2 exp(-pi^2 n^2/t) cosh(pi n phi/t)]`.
/// Antipodal, with `psi = pi - phi`:
/// `theta_t = W_t(psi) sum_{n>=0} 2 exp(-pi^2 (2n+1)^2/4t) cosh(pi (2n+1) psi/2t)`.
/// `H` is distributed over each product by the Leibniz rule; in the antipodal
/// variable `H_phi = D_psi`.
pub fn hn_theta_in(regime: Regime, t: f64, phi: f64, n: usize, cfg: &ThetaConfig) -> Result<LogValue> {
    check_time(t)?;
    check_order(n)?;
    check_angle(phi)?;
    let x = match regime {
        Regime::Bulk => phi,
        Regime::Antipodal => PI - phi,
    };
    if x >= PI - 1e-12 {
        return Err(Error::Pole { k: 1, z: x });
    }
    let stack = PhiCache::global().stack(n)?;
    let phiv = stack.values_at(x);
    let s: Vec<LogValue> = (0..=n).map(|m| s_factor(t, m, &phiv)).collect();
    let binom = binomials(n);
    // coefficient of D^k cosh in the Leibniz expansion
    let coef: Vec<LogValue> = (0..=n)
        .map(|k| {
            let flip = match regime {
                Regime::Bulk => k % 2 == 1,
                Regime::Antipodal => (n - k) % 2 == 1,
            };
            let c = s[n - k].scale_log(binom[k].ln());
            if flip {
                -c
            } else {
                c
            }
        })
        .collect();

    let mut acc = LogSum::new();
    if regime == Regime::Bulk {
        acc.push(s[n]);
    }
    let mut lattice = 0usize;
    let log_eps = cfg.eps_rel.ln();
    loop {
        let (weight, v) = match regime {
            Regime::Bulk => {
                let m = (lattice + 1) as f64;
                (-PI * PI * m * m / t, PI * m / t)
            }
            Regime::Antipodal => {
                let m = (2 * lattice + 1) as f64;
                (-PI * PI * m * m / (4.0 * t), PI * m / (2.0 * t))
            }
        };
        let base = std::f64::consts::LN_2 + weight;
        let mut pair_max = f64::NEG_INFINITY;
        for (k, c) in coef.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let term = c.scale_log(base + log_dk_cosh(k, v, x, &phiv));
            pair_max = pair_max.max(term.log_abs());
            acc.push(term);
        }
        lattice += 1;
        if lattice >= MIN_LATTICE_TERMS && pair_max < acc.max_log() + log_eps {
            break;
        }
        if lattice > 10_000 {
            return Err(Error::Integrity("lattice sum failed to converge".into()));
        }
    }
    let total = acc.value();
    if total.sign() != Sign::Positive {
        return Err(Error::Integrity(format!(
            "H^{n} theta at t = {t}, phi = {phi} evaluated to {total}; cancellation exceeded the working precision"
        )));
    }
    Ok(total.scale_log(log_w(t, x)))
}
