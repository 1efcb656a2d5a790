//! Gauss rules for the symmetric Jacobi weight `(1 - v^2)^alpha` on `(-1, 1)`
//! by the Golub-Welsch construction, plus a small adaptive integrator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRule {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(x_i)`
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `int_{-1}^{1} (1 - v^2)^alpha dv = sqrt(pi) Gamma(alpha+1) / Gamma(alpha+3/2)`
pub fn jacobi_mass(alpha: f64) -> f64 {
    (0.5 * std::f64::consts::PI.ln() + libm::lgamma(alpha + 1.0) - libm::lgamma(alpha + 1.5)).exp()
}

/// `n`-point Gauss rule for `(1 - v^2)^alpha`, exact for polynomials of degree `2n - 1`.
pub fn gauss_jacobi(n: usize, alpha: f64) -> Result<QuadRule> {
    if alpha <= -1.0 || !alpha.is_finite() {
        return Err(Error::domain(format!("Jacobi exponent must exceed -1, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::domain("a quadrature rule needs at least one node"));
    }
    // Jacobi matrix of the Gegenbauer polynomials with lambda = alpha + 1/2
    let lambda = alpha + 0.5;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for k in 1..n {
        let kf = k as f64;
        let b2 = if k == 1 {
            1.0 / (2.0 * (lambda + 1.0))
        } else {
            kf * (kf + 2.0 * lambda - 1.0) / (4.0 * (kf + lambda) * (kf + lambda - 1.0))
        };
        off[k - 1] = b2.sqrt();
    }
    let mut z = vec![0.0; n];
    z[0] = jacobi_mass(alpha).sqrt();
    imtqlx(&mut diag, &mut off, &mut z)?;

    // enforce exact symmetry
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let j = n - 1 - i;
        nodes[i] = 0.5 * (diag[i] - diag[j]);
        weights[i] = 0.5 * (z[i] * z[i] + z[j] * z[j]);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadRule { alpha, nodes, weights })
}

/// Memoized [`gauss_jacobi`].
pub fn gauss_jacobi_cached(n: usize, alpha: f64) -> Result<Arc<QuadRule>> {
    type Cache = Mutex<HashMap<(usize, u64), Arc<QuadRule>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (n, alpha.to_bits());
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let rule = Arc::new(gauss_jacobi(n, alpha)?);
    Ok(cache.lock().unwrap().entry(key).or_insert(rule).clone())
}

pub fn gauss_legendre(n: usize) -> Arc<QuadRule> {
    gauss_jacobi_cached(n, 0.0).expect("Legendre weight is valid")
}

/// Implicit QL iteration on a symmetric tridiagonal matrix, rotating `z`
/// along with the eigenvectors (Elhay and Kautsky's IMTQLX). On return `d`
/// holds the eigenvalues in ascending order and `z` the matching first
/// eigenvector components, scaled by the initial `z[0]`.
fn imtqlx(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    const MAX_ITER: usize = 60;
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                if e[m].abs() <= f64::EPSILON * (d[m].abs() + d[m + 1].abs()) {
                    break;
                }
                m += 1;
            }
            let mut p = d[l];
            if m == l {
                break;
            }
            if iter == MAX_ITER {
                return Err(Error::Integrity("tridiagonal QL iteration did not converge".into()));
            }
            iter += 1;
            let mut g = (d[l + 1] - p) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - p + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            p = 0.0;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                if g.abs() <= f.abs() {
                    c = g / f;
                    r = c.hypot(1.0);
                    e[i + 1] = f * r;
                    s = 1.0 / r;
                    c *= s;
                } else {
                    s = f / g;
                    r = s.hypot(1.0);
                    e[i + 1] = g * r;
                    c = 1.0 / r;
                    s *= c;
                }
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    // selection sort keeps z paired with d
    for i in 0..n - 1 {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            z.swap(i, k);
        }
    }
    Ok(())
}

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]`.
///
/// Each panel is compared against its two halves; panels are accepted once
/// the difference falls below `tol` times the running magnitude of the
/// integral. Returns the estimate and the number of function evaluations.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, usize)> {
    integrate_adaptive_floor(f, a, b, tol, 0.0)
}

/// As [`integrate_adaptive`], also accepting panels whose error estimate is
/// below the absolute floor `abs_tol`.
pub fn integrate_adaptive_floor(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    abs_tol: f64,
) -> Result<(f64, usize)> {
    const ORDER: usize = 15;
    const MAX_PANELS: usize = 1 << 16;
    let rule = gauss_legendre(ORDER);
    let panel = |lo: f64, hi: f64| {
        let h = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        h * rule.integrate(|x| f(mid + h * x))
    };
    let whole = panel(a, b);
    let mut scale = whole.abs();
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    let mut evals = ORDER;
    let mut panels = 0;
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid);
        let right = panel(mid, hi);
        evals += 2 * ORDER;
        panels += 1;
        let refined = left + right;
        scale = scale.max(refined.abs());
        if (refined - est).abs() <= (tol * scale).max(abs_tol) || depth >= 40 {
            total += refined;
        } else {
            if panels > MAX_PANELS {
                return Err(Error::Accuracy {
                    nodes: evals,
                    last: refined,
                    previous: est,
                });
            }
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok((total, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn chebyshev_two_points() {
        let r = gauss_jacobi(2, -0.5).unwrap();
        assert_relative_eq!(r.nodes[1], (PI / 4.0).cos(), epsilon = 1e-15);
        assert_relative_eq!(r.nodes[0], -(PI / 4.0).cos(), epsilon = 1e-15);
        assert_relative_eq!(r.weights[0], FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(r.weights[1], FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn chebyshev_nodes_closed_form() {
        let n = 37;
        let r = gauss_jacobi(n, -0.5).unwrap();
        for (i, &x) in r.nodes.iter().enumerate() {
            let want = -((2 * i + 1) as f64 * PI / (2 * n) as f64).cos();
            assert!((x - want).abs() < 1e-14, "{i}");
        }
    }

    #[test]
    fn weights_sum_to_mass() {
        for &alpha in &[-0.5, 0.0, 0.5, 1.5, 3.0, -0.9] {
            for &n in &[1, 5, 64, 513] {
                let r = gauss_jacobi(n, alpha).unwrap();
                let s: f64 = r.weights.iter().sum();
                assert_relative_eq!(s, jacobi_mass(alpha), max_relative = 1e-13);
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
                assert!(r.weights.iter().all(|&w| w > 0.0));
            }
        }
        assert_relative_eq!(jacobi_mass(-0.5), PI, max_relative = 1e-15);
    }

    #[test]
    fn beta_moment() {
        // int v^2 (1-v^2)^{1/2} = B(3/2, 3/2) = pi/8
        let r = gauss_jacobi(16, 0.5).unwrap();
        assert_relative_eq!(r.integrate(|v| v * v), PI / 8.0, max_relative = 1e-14);
    }

    #[test]
    fn exact_degree() {
        // int v^{2k} (1-v^2)^a dv = B(k+1/2, a+1)
        let a = 1.5;
        let r = gauss_jacobi(6, a).unwrap();
        for k in 0..6 {
            let b = (libm::lgamma(k as f64 + 0.5) + libm::lgamma(a + 1.0) - libm::lgamma(k as f64 + a + 1.5)).exp();
            assert_relative_eq!(r.integrate(|v| v.powi(2 * k)), b, max_relative = 1e-13);
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(gauss_jacobi(4, -1.0).is_err());
    }

    #[test]
    fn adaptive() {
        let (v, _) = integrate_adaptive(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-14).unwrap();
        assert_relative_eq!(v, PI.sqrt(), max_relative = 1e-13);
        let (v, _) = integrate_adaptive(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-10);
    }
}
