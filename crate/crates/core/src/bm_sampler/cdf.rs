//! Distribution of the angle travelled in time `t`, with density
//! `K_t^d(phi) omega_{d-1} sin^{d-1}(phi)` on `[0, pi]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series_oracle::log_sphere_area;
use crate::sphere_kernel::{kernel_log, quadrature::gauss_legendre, EvalConfig, KernelQuery};

pub const DEFAULT_GRID: usize = 2048;
const MIN_GRID: usize = 256;
/// Mass defect above this means the kernel itself is off.
const MASS_TOLERANCE: f64 = 1e-6;

/// Tabulated CDF with a monotone cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleCDF {
    pub d: usize,
    pub t: f64,
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Interpolant slopes, the density limited by Fritsch-Carlson.
    pub slopes: Vec<f64>,
    /// Total mass before renormalization.
    pub mass: f64,
}

/// `log(K_t^d(phi) omega_{d-1} sin^{d-1} phi)`
pub fn log_angle_density(d: usize, t: f64, phi: f64, cfg: &EvalConfig) -> Result<f64> {
    let k = kernel_log(&KernelQuery::new(d, t, phi)?, cfg)?.log_abs();
    let s = if d == 1 { 0.0 } else { (d as f64 - 1.0) * phi.sin().ln() };
    Ok(k + log_sphere_area(d - 1) + s)
}

/// `n` increasing angles from 0 to pi, half of them within ten diffusion
/// lengths `sqrt(2 d t)` when that is shorter than pi.
fn refined_grid(d: usize, t: f64, n: usize) -> Vec<f64> {
    let scale = 10.0 * (2.0 * d as f64 * t).sqrt();
    if scale >= 0.5 * PI {
        return (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect();
    }
    let fine = n / 2;
    let coarse = n - fine;
    let mut g: Vec<f64> = (0..fine).map(|i| scale * i as f64 / fine as f64).collect();
    g.extend((0..coarse).map(|i| scale + (PI - scale) * i as f64 / (coarse - 1) as f64));
    g
}

impl AngleCDF {
    pub fn new(d: usize, t: f64, n_grid: usize, cfg: &EvalConfig) -> Result<Self> {
        if n_grid < MIN_GRID {
            return Err(Error::domain(format!("an angle CDF needs at least {MIN_GRID} grid points, got {n_grid}")));
        }
        KernelQuery::new(d, t, 0.0)?;
        let grid = refined_grid(d, t, n_grid);
        let cdf = Self::from_log_density(d, t, grid, |phi| log_angle_density(d, t, phi, cfg))?;
        if (cdf.mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Integrity(format!(
                "angle density for d={d}, t={t} has mass {}, expected 1",
                cdf.mass
            )));
        }
        Ok(cdf)
    }

    /// Tabulates `exp(log_density)` on `grid` and renormalizes, without
    /// checking the mass.
    pub fn from_log_density(d: usize, t: f64, grid: Vec<f64>, log_density: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let n = grid.len();
        if n < 2 || grid[0] != 0.0 || grid[n - 1] != PI || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("the grid must increase strictly from 0 to pi"));
        }
        let density = |phi: f64| -> Result<f64> {
            if phi <= 0.0 || phi >= PI {
                // sin^{d-1} vanishes at the ends except on the circle
                if d == 1 {
                    return log_density(phi).map(f64::exp);
                }
                return Ok(0.0);
            }
            log_density(phi).map(f64::exp)
        };
        let rule = gauss_legendre(6);
        let mut cum = vec![0.0; n];
        for i in 1..n {
            let (a, b) = (grid[i - 1], grid[i]);
            let h = 0.5 * (b - a);
            let m = 0.5 * (a + b);
            let mut cell = 0.0;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                cell += w * density(m + h * x)?;
            }
            cum[i] = cum[i - 1] + h * cell;
        }
        let mass = cum[n - 1];
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Integrity(format!("angle density has mass {mass}")));
        }
        let cdf: Vec<f64> = cum.iter().map(|c| c / mass).collect();
        let mut slopes = Vec::with_capacity(n);
        for &phi in &grid {
            slopes.push(density(phi)? / mass);
        }
        limit_slopes(&grid, &cdf, &mut slopes);
        let mut out = AngleCDF {
            d,
            t,
            grid,
            cdf,
            slopes,
            mass,
        };
        out.cdf[0] = 0.0;
        out.cdf[n - 1] = 1.0;
        Ok(out)
    }

    /// CDF of the uniform distribution on the sphere, density proportional to `sin^{d-1}`.
    pub fn equilibrium(d: usize, n_grid: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let grid = (0..n_grid).map(|i| PI * i as f64 / (n_grid - 1) as f64).collect();
        Self::from_log_density(d, f64::INFINITY, grid, |phi| Ok((d as f64 - 1.0) * phi.sin().ln()))
    }

    fn cell(&self, phi: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= phi);
        i.clamp(1, self.grid.len() - 1) - 1
    }

    fn hermite(&self, i: usize, s: f64) -> f64 {
        let h = self.grid[i + 1] - self.grid[i];
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    pub fn eval(&self, phi: f64) -> f64 {
        if phi <= 0.0 {
            return 0.0;
        }
        if phi >= PI {
            return 1.0;
        }
        let i = self.cell(phi);
        let s = (phi - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        self.hermite(i, s).clamp(0.0, 1.0)
    }

    /// Inverse CDF by bisection inside the bracketing cell.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return PI;
        }
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        self.grid[i] + s * (self.grid[i + 1] - self.grid[i])
    }
}

/// Fritsch-Carlson: zero slopes at flat cells and keep `(alpha, beta)` in the
/// circle of radius 3, which makes each cubic piece monotone.
fn limit_slopes(x: &[f64], y: &[f64], m: &mut [f64]) {
    for i in 0..x.len() - 1 {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if delta == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta;
        let b = m[i + 1] / delta;
        let r = a.hypot(b);
        if r > 3.0 {
            let tau = 3.0 / r;
            m[i] = tau * a * delta;
            m[i + 1] = tau * b * delta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_symmetry() {
        let c = AngleCDF::new(2, 100.0, 256, &EvalConfig::default()).unwrap();
        assert_relative_eq!(c.eval(PI / 2.0), 0.5, epsilon = 1e-10);
        assert_eq!(c.eval(PI), 1.0);
        assert_eq!(c.eval(0.0), 0.0);
        // 1 - cos phi over 2
        assert_relative_eq!(c.eval(1.0), (1.0 - 1f64.cos()) / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn small_time_concentration() {
        let cfg = EvalConfig::default();
        let c = AngleCDF::new(3, 0.01, 1024, &cfg).unwrap();
        assert!(c.eval(5.0 * (2.0 * 3.0 * 0.01f64).sqrt()) > 0.99);
        assert!((c.mass - 1.0).abs() < 1e-8, "{}", c.mass);
    }

    #[test]
    fn monotone_and_invertible() {
        let c = AngleCDF::new(3, 0.3, 256, &EvalConfig::default()).unwrap();
        assert!(c.cdf.windows(2).all(|w| w[0] <= w[1]));
        let mut prev = 0.0;
        for i in 0..=2000 {
            let v = c.eval(PI * i as f64 / 2000.0);
            assert!(v >= prev);
            prev = v;
        }
        for &u in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999] {
            assert_relative_eq!(c.eval(c.quantile(u)), u, epsilon = 1e-12);
        }
        assert_eq!(c.quantile(0.0), 0.0);
        assert_eq!(c.quantile(1.0), PI);
    }

    #[test]
    fn closed_form_equilibrium() {
        // d = 3: (phi - sin phi cos phi) / pi
        let c = AngleCDF::equilibrium(3, 512).unwrap();
        for &p in &[0.2, 1.0, 2.5] {
            assert_relative_eq!(c.eval(p), (p - p.sin() * p.cos()) / PI, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_small_grid() {
        assert!(AngleCDF::new(2, 0.1, 100, &EvalConfig::default()).is_err());
    }
}
