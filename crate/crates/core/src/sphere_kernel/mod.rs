//! `K_t^d(phi)` and `d/dphi K_t^d(phi)` for every dimension.
//!
//! Odd `d = 2N+1` use `K^{2N+1} = (2 pi)^{-N} e^{t N^2} H^N theta_t`, even `d`
//! the reduction integral over `K^{2d-1}_{t/4}`, and large times the spectral
//! series.

pub mod quadrature;
pub mod reduction;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logvalue::{LogValue, Sign};
use crate::series_oracle::{log_sphere_area, oracle_kernel, ORACLE_MIN_TIME};
use crate::theta_kernel::{hn_theta, reduce_angle, theta_eps, ThetaConfig};

pub use quadrature::{gauss_jacobi, QuadRule};
pub use reduction::{reduction_even, ReductionForm, ReductionValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub d: usize,
    pub t: f64,
    pub phi: f64,
}

impl KernelQuery {
    /// Validates `d` and `t` and maps `phi` into `[0, pi]`.
    pub fn new(d: usize, t: f64, phi: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("time must be positive and finite, got {t}")));
        }
        if !phi.is_finite() {
            return Err(Error::domain(format!("angle must be finite, got {phi}")));
        }
        Ok(KernelQuery {
            d,
            t,
            phi: reduce_angle(phi),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub eps_rel: f64,
    /// Times at or above this go to the spectral series.
    pub t_crossover: f64,
    pub quad_nodes_init: usize,
    pub quad_nodes_max: usize,
    /// Below this time the even path may switch to the gamma parametrization.
    pub smallt_quad_threshold: f64,
    pub theta: ThetaConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            eps_rel: 1e-12,
            t_crossover: 1.0,
            quad_nodes_init: 32,
            quad_nodes_max: 4096,
            smallt_quad_threshold: 0.05,
            theta: ThetaConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_rel, self.t_crossover, self.smallt_quad_threshold];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::domain("eps_rel, t_crossover and smallt_quad_threshold must be positive"));
        }
        if self.eps_rel >= 1.0 {
            return Err(Error::domain("eps_rel must be below 1"));
        }
        if self.quad_nodes_init == 0 || self.quad_nodes_init > self.quad_nodes_max {
            return Err(Error::domain("need 0 < quad_nodes_init <= quad_nodes_max"));
        }
        self.theta.validate()
    }
}

/// Evaluation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Chosen by dimension and time.
    Auto,
    /// Closed form for odd `d`.
    Theta,
    /// Reduction integral for even `d`.
    Reduction,
    /// Spectral series.
    Series,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "theta" => Ok(Method::Theta),
            "reduction" => Ok(Method::Reduction),
            "series" => Ok(Method::Series),
            _ => Err(Error::domain(format!("unknown method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Auto => "auto",
            Method::Theta => "theta",
            Method::Reduction => "reduction",
            Method::Series => "series",
        })
    }
}

/// A kernel value with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub value: LogValue,
    pub method: Method,
    /// Series terms or quadrature nodes used (0 for the closed form).
    pub work: usize,
    pub est_rel_error: f64,
    pub warning: bool,
}

/// Method that `Auto` resolves to.
pub fn auto_method(q: &KernelQuery, cfg: &EvalConfig) -> Method {
    if q.d == 1 {
        Method::Theta
    } else if q.t >= cfg.t_crossover {
        Method::Series
    } else if q.d % 2 == 1 {
        Method::Theta
    } else {
        Method::Reduction
    }
}

/// `log K_t^d(phi)` for odd `d` by the closed form, with `phi` in `[0, pi]`.
pub(crate) fn odd_closed_form(d: usize, t: f64, phi: f64, cfg: &EvalConfig) -> Result<LogValue> {
    debug_assert!(d % 2 == 1);
    if d == 1 {
        return theta_eps(t, phi, cfg.theta.eps_rel);
    }
    let n = (d - 1) / 2;
    let h = hn_theta(t, phi, n, &cfg.theta)?;
    let nf = n as f64;
    Ok(h.scale_log(t * nf * nf - nf * (2.0 * PI).ln()))
}

/// Kernel through a chosen path.
pub fn kernel_eval(q: &KernelQuery, cfg: &EvalConfig, method: Method) -> Result<KernelEval> {
    let method = match method {
        Method::Auto => auto_method(q, cfg),
        m => m,
    };
    match method {
        Method::Theta => {
            if q.d % 2 == 0 {
                return Err(Error::domain(format!("the theta path needs odd d, got {}", q.d)));
            }
            Ok(KernelEval {
                value: odd_closed_form(q.d, q.t, q.phi, cfg)?,
                method,
                work: 0,
                est_rel_error: cfg.theta.eps_rel,
                warning: false,
            })
        }
        Method::Reduction => {
            let r = reduction_even(q.d, q.t, q.phi, cfg)?;
            Ok(KernelEval {
                value: r.value,
                method,
                work: r.nodes,
                est_rel_error: r.last_change,
                warning: false,
            })
        }
        Method::Series => {
            let r = oracle_kernel(q.d, q.t, q.phi, cfg.eps_rel.min(1e-15))?;
            Ok(KernelEval {
                value: r.value,
                method,
                work: r.terms,
                est_rel_error: cfg.eps_rel,
                warning: r.warning || q.t < ORACLE_MIN_TIME,
            })
        }
        Method::Auto => unreachable!(),
    }
}

/// `log K_t^d(phi)`.
pub fn kernel_log(q: &KernelQuery, cfg: &EvalConfig) -> Result<LogValue> {
    Ok(kernel_eval(q, cfg, Method::Auto)?.value)
}

/// Linear kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub log: LogValue,
    /// The value is below the smallest positive `f64` and was returned as 0.
    pub underflow: bool,
}

pub fn kernel(q: &KernelQuery, cfg: &EvalConfig) -> Result<KernelValue> {
    let log = kernel_log(q, cfg)?;
    let value = log.to_f64();
    Ok(KernelValue {
        value,
        log,
        underflow: value == 0.0 && !log.is_zero(),
    })
}

/// `d/dphi K_t^d(phi) = -2 pi e^{-td} sin(phi) K_t^{d+2}(phi)`.
pub fn kernel_derivative_log(q: &KernelQuery, cfg: &EvalConfig) -> Result<LogValue> {
    kernel_derivative_eval(q, cfg, Method::Auto).map(|e| e.value)
}

pub fn kernel_derivative_eval(q: &KernelQuery, cfg: &EvalConfig, method: Method) -> Result<KernelEval> {
    let up = KernelQuery { d: q.d + 2, ..*q };
    let s = q.phi.sin();
    if q.phi == 0.0 || q.phi == PI || s == 0.0 {
        return Ok(KernelEval {
            value: LogValue::ZERO,
            method: match method {
                Method::Auto => auto_method(&up, cfg),
                m => m,
            },
            work: 0,
            est_rel_error: 0.0,
            warning: false,
        });
    }
    let mut e = kernel_eval(&up, cfg, method)?;
    e.value = LogValue::new(e.value.log_abs() + (2.0 * PI).ln() - q.t * q.d as f64 + s.ln(), Sign::Negative);
    Ok(e)
}

/// `int_0^pi K_t^d(phi) omega_{d-1} sin^{d-1}(phi) dphi`, which is 1.
///
/// Panels grow geometrically from the diffusion scale `sqrt(t)`.
pub fn kernel_mass(d: usize, t: f64, cfg: &EvalConfig) -> Result<f64> {
    let peak = kernel_log(&KernelQuery::new(d, t, 0.0)?, cfg)?.log_abs();
    let log_area = log_sphere_area(d - 1);
    let failure = std::cell::Cell::new(None);
    let f = |phi: f64| -> f64 {
        if phi <= 0.0 || phi >= PI {
            return 0.0;
        }
        match kernel_log(&KernelQuery { d, t, phi }, cfg) {
            Ok(k) => (k.log_abs() - peak + log_area + (d as f64 - 1.0) * phi.sin().ln()).exp(),
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let mut edges = vec![0.0];
    let mut x = t.sqrt();
    while x < PI {
        edges.push(x);
        x *= 2.0;
    }
    edges.push(PI);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += quadrature::integrate_adaptive(&f, w[0], w[1], 1e-13)?.0;
    }
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(total * peak.exp())
}
