//! Spectral evaluation
//! `K_t^d(phi) = (1/|S^d|) sum_n exp(-n(n+d-1)t) N(d,n) C_n^l(cos phi)/C_n^l(1)`,
//! `l = (d-1)/2`, used as an oracle for the other paths and as the large-time
//! evaluator.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::logvalue::{LogValue, Sign};
use crate::sphere_kernel::quadrature::{gauss_jacobi_cached, gauss_legendre};
use crate::theta_kernel::{reduce_angle, theta_dual};

/// Below this time the oracle still works but reports a warning.
pub const ORACLE_MIN_TIME: f64 = 0.05;
/// From this time on plain `f64` summation is accurate to a few ulps.
const FLOAT_PATH_TIME: f64 = 1.0;

/// One term of the spectral sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTerm {
    pub n: usize,
    pub eigen: f64,
    pub mult: f64,
    pub gegen: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: LogValue,
    pub terms: usize,
    /// Set when `t` is below [`ORACLE_MIN_TIME`] or the sum came out nonpositive.
    pub warning: bool,
}

/// Area of the unit sphere `S^d`: `2 pi^{(d+1)/2} / Gamma((d+1)/2)`.
pub fn sphere_area(d: usize) -> f64 {
    log_sphere_area(d).exp()
}

pub fn log_sphere_area(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    std::f64::consts::LN_2 + h * PI.ln() - libm::lgamma(h)
}

/// Dimension of the degree-`n` spherical harmonics on `S^d`,
/// `(2n+d-1)(n+d-2)! / (n! (d-1)!)`.
pub fn multiplicity(d: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if d == 1 {
        return 2.0;
    }
    let binom = (1..=n).fold(1.0, |acc, k| acc * (k + d - 2) as f64 / k as f64);
    (2 * n + d - 1) as f64 * binom / (d - 1) as f64
}

/// `C_n^l(x) / C_n^l(1)` by the three-term recurrence on the normalized ratio.
pub fn gegenbauer_ratio(n: usize, lambda: f64, x: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::domain(format!("Gegenbauer index must be positive, got {lambda}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} outside [-1, 1]")));
    }
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return Ok(1.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = (2.0 * (kf + lambda - 1.0) * x * cur - (kf - 1.0) * prev) / (kf + 2.0 * lambda - 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// The first `count` spectral terms at `(d, t, phi)`, in `f64`.
pub fn spectral_terms(d: usize, t: f64, phi: f64, count: usize) -> Result<Vec<SpectralTerm>> {
    check(d, t)?;
    let x = reduce_angle(phi).cos();
    let lambda = (d as f64 - 1.0) / 2.0;
    (0..count)
        .map(|n| {
            let gegen = if d == 1 {
                (n as f64 * reduce_angle(phi)).cos()
            } else {
                gegenbauer_ratio(n, lambda, x)?
            };
            Ok(SpectralTerm {
                n,
                eigen: (-((n * (n + d - 1)) as f64) * t).exp(),
                mult: multiplicity(d, n),
                gegen,
            })
        })
        .collect()
}

fn check(d: usize, t: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Spectral kernel value.
///
/// For `t >= 1` the sum is taken in `f64`; below that it is summed in binary
/// fixed point with enough bits to absorb the cancellation down to
/// `exp(-pi^2/4t)`, and truncated once a geometric tail majorant drops below
/// the working resolution. `eps_rel` sets the truncation of the `f64` sum.
pub fn oracle_kernel(d: usize, t: f64, phi: f64, eps_rel: f64) -> Result<OracleValue> {
    check(d, t)?;
    if d == 1 {
        let v = theta_dual(t, phi)?;
        return Ok(OracleValue {
            value: v.value,
            terms: v.terms,
            warning: v.warning,
        });
    }
    let (sum, terms) = if t >= FLOAT_PATH_TIME {
        float_sum(d, t, reduce_angle(phi).cos(), eps_rel)
    } else {
        fixed_sum(d, t, reduce_angle(phi).cos())
    };
    let value = sum.scale_log(-log_sphere_area(d));
    Ok(OracleValue {
        value,
        terms,
        warning: t < ORACLE_MIN_TIME || value.sign() != Sign::Positive,
    })
}

/// `K_t^d(phi) - 1/omega_d` by the `f64` series without its constant term,
/// which keeps full relative precision when `K` itself is within rounding of
/// the uniform density. Intended for `t >= 1`.
pub fn equilibrium_deviation(d: usize, t: f64, phi: f64) -> Result<f64> {
    check(d, t)?;
    let phi = reduce_angle(phi);
    let x = phi.cos();
    let lambda = (d as f64 - 1.0) / 2.0;
    let (mut prev, mut cur) = (1.0, if d == 1 { phi.cos() } else { x });
    let mut sum = 0.0;
    let mut n = 1;
    loop {
        let w = if d == 1 { 2.0 * (-t * (n * n) as f64).exp() } else { log_weight(d, t, n).exp() };
        sum += w * cur;
        if n > 2 && w < 1e-18 * sum.abs() {
            break;
        }
        n += 1;
        if d == 1 {
            cur = (n as f64 * phi).cos();
        } else {
            let kf = n as f64;
            let next = (2.0 * (kf + lambda - 1.0) * x * cur - (kf - 1.0) * prev) / (kf + 2.0 * lambda - 1.0);
            prev = cur;
            cur = next;
        }
    }
    Ok(sum / sphere_area(d))
}

/// `log(N(d,n) e^{-n(n+d-1)t})`
fn log_weight(d: usize, t: f64, n: usize) -> f64 {
    multiplicity(d, n).ln() - (n * (n + d - 1)) as f64 * t
}

/// Whether the terms beyond `n` sum to less than `exp(log_bound)`, using the
/// ratio of consecutive weights as a geometric majorant once it is below 1/2.
fn tail_below(d: usize, t: f64, n: usize, log_bound: f64) -> bool {
    let a = log_weight(d, t, n + 1);
    let ratio = (log_weight(d, t, n + 2) - a).exp();
    // the ratio is decreasing in n once past the peak
    ratio < 0.5 && a - (1.0 - ratio).ln() < log_bound
}

fn float_sum(d: usize, t: f64, x: f64, eps_rel: f64) -> (LogValue, usize) {
    let lambda = (d as f64 - 1.0) / 2.0;
    let (mut prev, mut cur) = (1.0, x);
    let mut sum = 1.0;
    let mut n = 1;
    loop {
        sum += log_weight(d, t, n).exp() * cur;
        if tail_below(d, t, n, eps_rel.ln() + sum.abs().ln()) {
            break;
        }
        n += 1;
        let kf = n as f64;
        let next = (2.0 * (kf + lambda - 1.0) * x * cur - (kf - 1.0) * prev) / (kf + 2.0 * lambda - 1.0);
        prev = cur;
        cur = next;
    }
    (LogValue::from_f64(sum), n + 1)
}

fn fixed_sum(d: usize, t: f64, x: f64) -> (LogValue, usize) {
    // extra bits cover the peak term size ~ t^{-d/2} and the multiplicities
    let extra = 16 + 4 * d as u32;
    let fx = Fixed::for_time(t, extra);
    let q = fx.from_f64((-t).exp());
    let c = fx.from_f64(x);
    let q2 = fx.mul(&q, &q);
    // the result can be as small as exp(-pi^2/4t), so the tail must drop
    // below the fixed-point resolution rather than below eps_rel
    let bound = -(fx.prec() as f64) * std::f64::consts::LN_2;

    let mut sum = fx.one();
    // step = q^{2n+d-2}, eig = q^{n(n+d-1)}
    let mut step = (0..d).fold(fx.one(), |acc, _| fx.mul(&acc, &q));
    let mut eig = step.clone();
    // binom = C(n+d-2, n) exactly
    let mut binom = BigInt::from(d - 1);
    let (mut prev, mut cur) = (fx.one(), c.clone());
    let mut n = 1usize;
    loop {
        let mult = (&binom * BigInt::from(2 * n + d - 1)) / BigInt::from(d - 1);
        sum += fx.mul(&eig, &cur) * mult;
        if tail_below(d, t, n, bound) {
            break;
        }
        n += 1;
        step = fx.mul(&step, &q2);
        eig = fx.mul(&eig, &step);
        binom = binom * BigInt::from(n + d - 2) / BigInt::from(n);
        // R_n = [c (2n+d-3) R_{n-1} - (n-1) R_{n-2}] / (n+d-2)
        let next = (fx.mul(&c, &cur) * BigInt::from(2 * n + d - 3) - &prev * BigInt::from(n - 1)) / BigInt::from(n + d - 2);
        prev = std::mem::replace(&mut cur, next);
    }
    debug_assert!(binom >= BigInt::one());
    (fx.to_log(&sum), n + 1)
}

/// Residuals of the semigroup law at each angle of `phi_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub d: usize,
    pub t: f64,
    pub s: f64,
    pub phi_grid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Compares `K_{t+s}(phi)` with the spherical convolution of `K_t` and `K_s`.
///
/// With the intermediate point at angle `a` from the source and azimuth
/// cosine `u` relative to the target,
/// `(K_t * K_s)(phi) = int_0^pi sin^{d-1} a K_t(a) int_{-1}^1 |S^{d-2}| (1-u^2)^{(d-3)/2}
///  K_s(arccos(cos a cos phi + u sin a sin phi)) du da`.
/// The factors are evaluated spectrally in `f64`; the target with the full oracle.
pub fn semigroup_convolve(d: usize, t: f64, s: f64, phi_grid: &[f64]) -> Result<SemigroupReport> {
    check(d, t)?;
    check(d, s)?;
    if d < 2 {
        return Err(Error::domain("the convolution formula needs d >= 2"));
    }
    let outer = gauss_legendre(256);
    let inner = gauss_jacobi_cached(96, (d as f64 - 3.0) / 2.0)?;
    let area_tangent = sphere_area(d - 2);
    let kernel = |time: f64, cosang: f64| -> f64 {
        float_kernel_cos(d, time, cosang.clamp(-1.0, 1.0))
    };

    let mut residuals = Vec::with_capacity(phi_grid.len());
    for &phi in phi_grid {
        let (sp, cp) = phi.sin_cos();
        let conv = outer.integrate(|y| {
            let a = 0.5 * PI * (y + 1.0);
            let (sa, ca) = a.sin_cos();
            let ring = inner.integrate(|u| kernel(s, ca * cp + u * sa * sp));
            0.5 * PI * sa.powi(d as i32 - 1) * kernel(t, ca) * area_tangent * ring
        });
        let target = oracle_kernel(d, t + s, phi, 1e-15)?.value.to_f64();
        residuals.push(((conv - target) / target).abs());
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(SemigroupReport {
        d,
        t,
        s,
        phi_grid: phi_grid.to_vec(),
        residuals,
        max_residual,
    })
}

/// Plain `f64` spectral sum with `cos(phi)` given; adequate for `t >~ 0.1`.
fn float_kernel_cos(d: usize, t: f64, x: f64) -> f64 {
    let (sum, _) = float_sum(d, t, x, 1e-16);
    sum.to_f64() / sphere_area(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn areas() {
        assert_relative_eq!(sphere_area(0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(1), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(2), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI, max_relative = 1e-15);
    }

    #[test]
    fn multiplicities() {
        // S^2: 2n+1, S^3: (n+1)^2
        for n in 0..10 {
            assert_eq!(multiplicity(2, n), (2 * n + 1) as f64);
            assert_relative_eq!(multiplicity(3, n), ((n + 1) * (n + 1)) as f64, max_relative = 1e-14);
        }
        assert_eq!(multiplicity(1, 0), 1.0);
        assert_eq!(multiplicity(1, 5), 2.0);
        assert_eq!(multiplicity(4, 1), 5.0);
    }

    #[test]
    fn gegenbauer_small_cases() {
        assert_eq!(gegenbauer_ratio(0, 1.5, 0.3).unwrap(), 1.0);
        assert_eq!(gegenbauer_ratio(1, 0.7, 0.3).unwrap(), 0.3);
        assert_relative_eq!(gegenbauer_ratio(2, 1.0, 0.0).unwrap(), -1.0 / 3.0, max_relative = 1e-15);
        assert!(gegenbauer_ratio(3, 0.0, 0.1).is_err());
        // lambda = 1/2 gives Legendre: P_3(x) = (5x^3 - 3x)/2
        let x: f64 = 0.4;
        assert_relative_eq!(gegenbauer_ratio(3, 0.5, x).unwrap(), (5.0 * x.powi(3) - 3.0 * x) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn equilibrium_limits() {
        let v = oracle_kernel(2, 60.0, 1.0, 1e-15).unwrap();
        assert_relative_eq!(v.value.to_f64(), 1.0 / (4.0 * PI), max_relative = 1e-15);
        assert!(!v.warning);
    }

    #[test]
    fn three_sphere_closed_form() {
        // N(3,n) = (n+1)^2, ratio = sin((n+1)phi)/((n+1) sin phi)
        let direct: f64 = (0..40)
            .map(|n| {
                let m = (n + 1) as f64;
                (-((n * (n + 2)) as f64)).exp() * m * (m * FRAC_PI_2).sin()
            })
            .sum::<f64>()
            / (2.0 * PI * PI);
        let v = oracle_kernel(3, 1.0, FRAC_PI_2, 1e-15).unwrap().value.to_f64();
        assert_relative_eq!(v, direct, max_relative = 1e-13);
        assert_relative_eq!(v, 0.050609, epsilon = 1e-5);
    }

    #[test]
    fn fixed_and_float_paths_agree() {
        for d in 2..=6 {
            for &phi in &[0.0, 1.0, 2.5, PI] {
                let x = phi.cos();
                let a = fixed_sum(d, 1.0, x).0;
                let b = float_sum(d, 1.0, x, 1e-16).0;
                assert!(a.rel_diff(&b) < 1e-13, "d={d} phi={phi}");
            }
        }
    }

    #[test]
    fn three_sphere_small_time_antipode() {
        // e^t/(4 pi t sin phi) sum_n (phi + 2 pi n) W_t(phi + 2 pi n), with the
        // Gaussian factor exp(-phi^2/4t) pulled out of every term
        let t = 1e-3;
        for &phi in &[2.0, 3.0, PI - 1e-3] {
            let s: f64 = (-3i32..=3)
                .map(|n| {
                    let x = phi + 2.0 * PI * n as f64;
                    x * (-(x * x - phi * phi) / (4.0 * t)).exp()
                })
                .sum();
            let log_k = t - (4.0 * PI * t).ln() - phi.sin().ln() + s.ln() - 0.5 * (4.0 * PI * t).ln() - phi * phi / (4.0 * t);
            let v = oracle_kernel(3, t, phi, 1e-15).unwrap().value;
            // a rounding of e^{-t} shifts t by 1e-16, moving log K by ~ phi^2/4t^2 * 1e-16
            assert!((v.log_abs() - log_k).abs() < 1e-9, "phi={phi}: {} vs {log_k}", v.log_abs());
        }
    }

    #[test]
    fn deviation_from_equilibrium() {
        for &(d, t, p) in &[(1, 1.0, 0.4), (2, 1.5, 2.0), (5, 3.0, 1.0)] {
            let k = oracle_kernel(d, t, p, 1e-16).unwrap().value.to_f64();
            let dev = equilibrium_deviation(d, t, p).unwrap();
            assert_relative_eq!(k - 1.0 / sphere_area(d), dev, max_relative = 1e-9);
        }
        // leading term N(d,1) e^{-dt} cos(phi) / omega_d
        let dev = equilibrium_deviation(6, 5.0, 1.0).unwrap();
        let lead = 7.0 * (-30.0f64).exp() * 1f64.cos() / sphere_area(6);
        assert_relative_eq!(dev, lead, max_relative = 1e-8);
    }

    #[test]
    fn truncation_and_warning() {
        let v = oracle_kernel(4, 0.01, 0.4, 1e-15).unwrap();
        assert!(v.warning);
        assert_eq!(v.value.sign(), Sign::Positive);
        assert!(oracle_kernel(0, 1.0, 0.0, 1e-15).is_err());
        assert!(oracle_kernel(2, -1.0, 0.0, 1e-15).is_err());
    }

    #[test]
    fn d1_matches_theta() {
        let a = oracle_kernel(1, 1.0, 0.0, 1e-15).unwrap().value;
        assert!(a.rel_diff(&crate::theta_kernel::theta(1.0, 0.0).unwrap()) < 1e-14);
    }

    #[test]
    fn eigen_factors_multiply() {
        for d in [2, 3, 6] {
            let a = spectral_terms(d, 0.2, 1.0, 30).unwrap();
            let b = spectral_terms(d, 0.3, 1.0, 30).unwrap();
            let c = spectral_terms(d, 0.5, 1.0, 30).unwrap();
            for ((a, b), c) in a.iter().zip(&b).zip(&c) {
                assert_relative_eq!(a.eigen * b.eigen, c.eigen, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn semigroup_small_residuals() {
        let r = semigroup_convolve(2, 0.2, 0.3, &[0.0, 0.7, 1.6, 2.4, PI]).unwrap();
        assert!(r.max_residual < 1e-6, "{:?}", r.residuals);
        let r = semigroup_convolve(3, 0.5, 0.5, &[0.1, 1.0, 3.0]).unwrap();
        assert!(r.max_residual < 1e-6, "{:?}", r.residuals);
    }
}
