//! Even dimensions through
//! `K_t^d(phi) = c_d int_{-1}^{1} K_{t/4}^{2d-1}(arccos(v cos(phi/2))) (1-v^2)^{(d-3)/2} dv`,
//! `c_d = 2^{1-d} pi^{(d-1)/2} / Gamma((d-1)/2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_jacobi_cached, integrate_adaptive_floor};
use super::{odd_closed_form, EvalConfig};
use crate::error::{Error, Result};
use crate::logvalue::{LogSum, LogValue};

/// Which parametrization of the reduction integral was summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReductionForm {
    /// Gauss-Jacobi in `v`, doubling the node count until converged.
    Jacobi,
    /// Adaptive Gauss-Legendre in `gamma = psi - phi/2`, split at the midpoint,
    /// with `gamma (gamma + phi) = t u^2` on the first half.
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionValue {
    pub value: LogValue,
    pub form: ReductionForm,
    pub nodes: usize,
    /// Relative change between the last two refinements.
    pub last_change: f64,
}

/// `log c_d`
pub fn log_reduction_constant(d: usize) -> f64 {
    let h = (d as f64 - 1.0) / 2.0;
    (1.0 - d as f64) * std::f64::consts::LN_2 + h * PI.ln() - libm::lgamma(h)
}

/// `arccos(v c)`, `c = cos(phi/2)`, without cancellation when `v c` is near `+-1`.
/// Takes `1 - c` rather than `c` to keep its relative precision.
fn arccos_scaled(v: f64, one_minus_c: f64) -> f64 {
    if v >= 0.0 {
        let one_minus = (1.0 - v) + v * one_minus_c;
        2.0 * (0.5 * one_minus).sqrt().asin()
    } else {
        let one_plus = (1.0 + v) - v * one_minus_c;
        PI - 2.0 * (0.5 * one_plus).sqrt().asin()
    }
    .clamp(0.0, PI)
}

fn check_even(d: usize) -> Result<()> {
    if d < 2 || d % 2 == 1 {
        return Err(Error::domain(format!("the reduction path needs even d >= 2, got {d}")));
    }
    Ok(())
}

/// Even-dimensional kernel at `phi` in `[0, pi]`.
pub fn reduction_even(d: usize, t: f64, phi: f64, cfg: &EvalConfig) -> Result<ReductionValue> {
    check_even(d)?;
    let s_max = PI * (PI - phi) / t;
    if t < cfg.smallt_quad_threshold && s_max > 60.0 {
        gamma_form(d, t, phi, cfg)
    } else {
        jacobi_form(d, t, phi, cfg)
    }
}

/// Gauss-Jacobi in `v` with node doubling.
pub fn jacobi_form(d: usize, t: f64, phi: f64, cfg: &EvalConfig) -> Result<ReductionValue> {
    check_even(d)?;
    let alpha = (d as f64 - 3.0) / 2.0;
    let one_minus_c = 2.0 * (0.25 * phi).sin().powi(2);
    let odd = 2 * d - 1;
    let tq = t / 4.0;

    let estimate = |n: usize| -> Result<LogValue> {
        let rule = gauss_jacobi_cached(n, alpha)?;
        let mut acc = LogSum::new();
        for (&v, &w) in rule.nodes.iter().zip(&rule.weights) {
            let psi = arccos_scaled(v, one_minus_c);
            acc.push(odd_closed_form(odd, tq, psi, cfg)?.scale_log(w.ln()));
        }
        Ok(acc.value())
    };

    let mut n = cfg.quad_nodes_init;
    let mut prev = estimate(n)?;
    let mut total_nodes = n;
    loop {
        if 2 * n > cfg.quad_nodes_max {
            return Err(Error::Accuracy {
                nodes: n,
                last: prev.log_abs(),
                previous: f64::NAN,
            });
        }
        n *= 2;
        let cur = estimate(n)?;
        total_nodes += n;
        let change = cur.rel_diff(&prev);
        if change < cfg.eps_rel {
            return Ok(ReductionValue {
                value: cur.scale_log(log_reduction_constant(d)),
                form: ReductionForm::Jacobi,
                nodes: total_nodes,
                last_change: change,
            });
        }
        if 2 * n > cfg.quad_nodes_max {
            return Err(Error::Accuracy {
                nodes: n,
                last: cur.log_abs(),
                previous: prev.log_abs(),
            });
        }
        prev = cur;
    }
}

/// With `psi = gamma + phi/2` and `L = pi - phi`:
/// `K_t^d(phi) = c_d / cos^{d-2}(phi/2) int_0^L K_{t/4}^{2d-1}(gamma + phi/2)
///   [sin(gamma + phi) sin(gamma)]^{(d-3)/2} sin(gamma + phi/2) dgamma`.
pub fn gamma_form(d: usize, t: f64, phi: f64, cfg: &EvalConfig) -> Result<ReductionValue> {
    check_even(d)?;
    let odd = 2 * d - 1;
    let tq = t / 4.0;
    let expo = (d as f64 - 3.0) / 2.0;
    let l = PI - phi;
    if l <= 0.0 {
        return Err(Error::domain("the gamma form needs phi < pi"));
    }
    // scale reference: the odd kernel at the start of the range
    let reference = odd_closed_form(odd, tq, 0.5 * phi, cfg)?.log_abs();
    // log K is of size phi^2/t, so its rounding error bounds what the
    // integrand can resolve
    let tol = cfg.eps_rel.max(8.0 * f64::EPSILON * reference.abs());

    let log_integrand = |gamma: f64| -> Result<f64> {
        let k = odd_closed_form(odd, tq, gamma + 0.5 * phi, cfg)?.log_abs();
        let s1 = (gamma + phi).sin();
        let s2 = gamma.sin();
        Ok(k + expo * (s1 * s2).ln() + (gamma + 0.5 * phi).sin().ln() - reference)
    };
    let failure = std::cell::Cell::new(None);
    let guard = |r: Result<f64>| -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };

    // first half: gamma(gamma + phi) = t u^2
    let half = 0.5 * l;
    let u_max = (half * (half + phi) / t).sqrt();
    // Gauss nodes are interior, so the endpoint singularities of the d = 2
    // integrand (removed by the substitutions) are never sampled
    let lower = |u: f64| -> f64 {
        let root = (phi * phi + 4.0 * t * u * u).sqrt();
        let gamma = 2.0 * t * u * u / (phi + root);
        let jac = 2.0 * t * u / root;
        if gamma <= 0.0 {
            return 0.0;
        }
        let lv = guard(log_integrand(gamma));
        (lv + jac.ln()).exp()
    };
    // the integrand decays like exp(-u^2): unit panels over the bulk, then
    // one panel for the rest
    let u_cut = u_max.min(40.0);
    let mut edges: Vec<f64> = (0..=8).map(f64::from).take_while(|&u| u < u_cut).collect();
    edges.push(u_cut);
    let mut first: f64 = 0.0;
    let mut evals = 0;
    for w in edges.windows(2) {
        let (v, n) = integrate_adaptive_floor(&lower, w[0], w[1], tol, tol * first.abs() * 1e-2)?;
        first += v;
        evals += n;
    }

    // second half: gamma = L - w^2
    let w_max = half.sqrt();
    let upper = |w: f64| -> f64 {
        let gamma = l - w * w;
        let lv = guard(log_integrand(gamma));
        (lv + (2.0 * w).ln()).exp()
    };
    let (second, n2) = integrate_adaptive_floor(&upper, 0.0, w_max, tol, tol * first.abs())?;
    evals += n2;
    if let Some(e) = failure.take() {
        return Err(e);
    }

    let total = first + second;
    let log_c = log_reduction_constant(d) - (d as f64 - 2.0) * (0.5 * phi).cos().ln();
    Ok(ReductionValue {
        value: LogValue::positive(total.ln() + reference + log_c),
        form: ReductionForm::Gamma,
        nodes: evals,
        last_change: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        assert_relative_eq!(log_reduction_constant(2).exp(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(log_reduction_constant(3).exp(), PI / 4.0, max_relative = 1e-15);
    }

    #[test]
    fn arccos_forms() {
        for &phi in &[0.0f64, 1e-6, 0.3, 2.0, PI] {
            let c = (0.5 * phi).cos();
            let omc = 2.0 * (0.25 * phi).sin().powi(2);
            for &v in &[-1.0, -0.7, 0.0, 0.4, 1.0] {
                let want = (v * c).acos();
                assert!((arccos_scaled(v, omc) - want).abs() < 1e-7, "{phi} {v}");
            }
        }
        // small angles keep their relative precision
        let phi: f64 = 1e-9;
        let a = arccos_scaled(1.0, 2.0 * (0.25 * phi).sin().powi(2));
        assert_relative_eq!(a, 0.5 * phi, max_relative = 1e-12);
    }

    #[test]
    fn rejects_odd_dimension() {
        assert!(reduction_even(3, 0.1, 1.0, &EvalConfig::default()).is_err());
    }
}
