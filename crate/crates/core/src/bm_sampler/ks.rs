//! Kolmogorov-Smirnov statistics.

use serde::{Deserialize, Serialize};

/// Asymptotic critical value `c(alpha) = sqrt(-ln(alpha/2) / 2)`; 1.628 at `alpha = 0.01`.
pub fn ks_critical(alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt()
}

/// `sup |F_n - F|` for a sample against a continuous CDF. Sorts `xs`.
pub fn ks_one_sample(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// `sup |F_n - G_m|` for two samples. Sorts both.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub n: usize,
    pub m: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub passed: bool,
}

impl KsReport {
    pub fn one_sample(n: usize, statistic: f64, alpha: f64) -> Self {
        let threshold = ks_critical(alpha) / (n as f64).sqrt();
        KsReport {
            n,
            m: 0,
            statistic,
            threshold,
            alpha,
            passed: statistic < threshold,
        }
    }

    pub fn two_sample(n: usize, m: usize, statistic: f64, alpha: f64) -> Self {
        let threshold = ks_critical(alpha) * ((n + m) as f64 / (n * m) as f64).sqrt();
        KsReport {
            n,
            m,
            statistic,
            threshold,
            alpha,
            passed: statistic < threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value() {
        assert!((ks_critical(0.01) - 1.6276).abs() < 1e-4);
        assert!((ks_critical(0.05) - 1.3581).abs() < 1e-4);
    }

    #[test]
    fn one_sample_exact() {
        // evenly spaced midpoints against the uniform CDF
        let mut xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let d = ks_one_sample(&mut xs, |x| x);
        assert!((d - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_sample_cases() {
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 0.0);
        let mut a = vec![1.0, 2.0];
        let mut b = vec![3.0, 4.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 1.0);
        let mut a = vec![1.0, 3.0];
        let mut b = vec![2.0, 4.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 0.5);
    }
}
