//! Two-sided envelopes for the kernel and its angular derivative, and scans
//! that measure the constants in them.
//!
//! For `0 < t <= T`
//! `K_t^d(phi) ~ (t + pi - phi)^{-(d-1)/2} t^{-d/2} exp(-phi^2/4t)`
//! and `-dK/dphi ~ phi (pi - phi) (t + pi - phi)^{-(d+1)/2} t^{-d/2-1} exp(-phi^2/4t)`;
//! for `t >= T` the kernel is comparable to 1 and the derivative to
//! `e^{-td} phi (pi - phi)`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logvalue::{LogValue, Sign};
use crate::sphere_kernel::{kernel_derivative_log, kernel_log, quadrature, EvalConfig, KernelQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    KernelSmallT,
    KernelLargeT,
    DerivativeSmallT,
    DerivativeLargeT,
}

impl EnvelopeKind {
    pub fn select(derivative: bool, large_t: bool) -> Self {
        match (derivative, large_t) {
            (false, false) => EnvelopeKind::KernelSmallT,
            (false, true) => EnvelopeKind::KernelLargeT,
            (true, false) => EnvelopeKind::DerivativeSmallT,
            (true, true) => EnvelopeKind::DerivativeLargeT,
        }
    }

    pub fn is_derivative(self) -> bool {
        matches!(self, EnvelopeKind::DerivativeSmallT | EnvelopeKind::DerivativeLargeT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub d: usize,
    pub kind: EnvelopeKind,
    /// Time separating the small-t and large-t regimes.
    pub threshold: f64,
    /// Multiplies `phi^2/4t`. Anything but 1 is a deliberately wrong envelope,
    /// used to check that scans can fail.
    pub exponent_scale: f64,
}

impl Envelope {
    pub fn new(d: usize, kind: EnvelopeKind) -> Self {
        Envelope {
            d,
            kind,
            threshold: 1.0,
            exponent_scale: 1.0,
        }
    }

    /// Small-t kind for `t <= threshold`, large-t kind above.
    pub fn for_time(d: usize, t: f64, derivative: bool, threshold: f64) -> Self {
        Envelope {
            threshold,
            ..Envelope::new(d, EnvelopeKind::select(derivative, t > threshold))
        }
    }

    pub fn log_at(&self, t: f64, phi: f64) -> Result<LogValue> {
        if self.d == 0 || !(t > 0.0) || !(0.0..=PI).contains(&phi) || !(self.threshold > 0.0) {
            return Err(Error::domain(format!(
                "envelope needs d >= 1, t > 0, phi in [0, pi]; got d={} t={t} phi={phi}",
                self.d
            )));
        }
        let d = self.d as f64;
        let gauss = -self.exponent_scale * phi * phi / (4.0 * t);
        let gap = t + PI - phi;
        let log = match self.kind {
            EnvelopeKind::KernelSmallT => -0.5 * (d - 1.0) * gap.ln() - 0.5 * d * t.ln() + gauss,
            EnvelopeKind::KernelLargeT => 0.0,
            EnvelopeKind::DerivativeSmallT | EnvelopeKind::DerivativeLargeT => {
                if phi == 0.0 || phi == PI {
                    return Ok(LogValue::ZERO);
                }
                let vanishing = phi.ln() + (PI - phi).ln();
                if self.kind == EnvelopeKind::DerivativeSmallT {
                    vanishing - 0.5 * (d + 1.0) * gap.ln() - (0.5 * d + 1.0) * t.ln() + gauss
                } else {
                    -t * d + vanishing
                }
            }
        };
        Ok(LogValue::positive(log))
    }
}

pub fn envelope_log(d: usize, t: f64, phi: f64, kind: EnvelopeKind) -> Result<LogValue> {
    Envelope::new(d, kind).log_at(t, phi)
}

/// `n` angles in `[0, pi]`: both endpoints, points at distance `1e-6 .. 1e-2`
/// from each, and a uniform interior grid for the rest.
pub fn phi_grid(n: usize) -> Result<Vec<f64>> {
    if n < 16 {
        return Err(Error::domain(format!("an angle grid needs at least 16 points, got {n}")));
    }
    let offsets = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
    let interior = n - 2 - 2 * offsets.len();
    let mut g = Vec::with_capacity(n);
    g.push(0.0);
    g.extend(offsets);
    let h = PI / (interior + 1) as f64;
    g.extend((1..=interior).map(|i| i as f64 * h));
    g.extend(offsets.iter().rev().map(|o| PI - o));
    g.push(PI);
    g.sort_by(f64::total_cmp);
    Ok(g)
}

/// `n` log-spaced times from `lo` to `hi` inclusive.
pub fn t_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n >= 1) || (n == 1 && lo != hi) {
        return Err(Error::domain(format!("bad time grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub d: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub phi_points: usize,
    /// Scan `-dK/dphi` instead of `K`.
    pub derivative: bool,
    /// Compare against the large-t envelopes.
    pub large_t: bool,
    pub exponent_scale: f64,
}

impl ScanSpec {
    pub fn kernel(d: usize, t_min: f64, t_max: f64, t_points: usize, phi_points: usize) -> Self {
        ScanSpec {
            d,
            t_min,
            t_max,
            t_points,
            phi_points,
            derivative: false,
            large_t: false,
            exponent_scale: 1.0,
        }
    }

    pub fn large_t(self) -> Self {
        ScanSpec { large_t: true, ..self }
    }

    pub fn derivative(self) -> Self {
        ScanSpec {
            derivative: true,
            ..self
        }
    }

    /// Both grids refined: twice the angles, and a new time between each pair.
    pub fn doubled(self) -> Self {
        ScanSpec {
            t_points: 2 * self.t_points - 1,
            phi_points: 2 * self.phi_points,
            ..self
        }
    }
}

/// One grid point. For derivative scans `log_kernel` is `log |dK/dphi|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub d: usize,
    pub t: f64,
    pub phi: f64,
    pub log_kernel: f64,
    pub log_envelope: f64,
    pub ratio: f64,
}

/// Evaluates the ratio `K / envelope` on the scan's grids, in `t`-major order.
/// Derivative scans skip `phi = 0, pi`, where both sides vanish, and fail if
/// the derivative is not negative.
pub fn scan_grid(spec: &ScanSpec, cfg: &EvalConfig) -> Result<Vec<ScanRow>> {
    let ts = t_grid(spec.t_min, spec.t_max, spec.t_points)?;
    let mut phis = phi_grid(spec.phi_points)?;
    if spec.derivative {
        phis.retain(|&p| p > 0.0 && p < PI);
    }
    let points: Vec<(f64, f64)> = ts.iter().flat_map(|&t| phis.iter().map(move |&p| (t, p))).collect();
    points
        .into_par_iter()
        .map(|(t, phi)| {
            let q = KernelQuery::new(spec.d, t, phi)?;
            let mut env = Envelope::new(spec.d, EnvelopeKind::select(spec.derivative, spec.large_t));
            env.exponent_scale = spec.exponent_scale;
            let le = env.log_at(t, phi)?.log_abs();
            let k = if spec.derivative {
                let v = kernel_derivative_log(&q, cfg)?;
                if v.sign() != Sign::Negative {
                    return Err(Error::Integrity(format!(
                        "dK/dphi is not negative at d={} t={t} phi={phi}",
                        spec.d
                    )));
                }
                v
            } else {
                kernel_log(&q, cfg)?
            };
            let lk = k.log_abs();
            Ok(ScanRow {
                d: spec.d,
                t,
                phi,
                log_kernel: lk,
                log_envelope: le,
                ratio: (lk - le).exp(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub grid_size: usize,
    pub inf_ratio: f64,
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub d: usize,
    pub derivative: bool,
    /// Grids of the finest level.
    pub t_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    pub inf_ratio: f64,
    pub sup_ratio: f64,
    pub arg_inf: (f64, f64),
    pub arg_sup: (f64, f64),
    pub refinement_history: Vec<RefinementLevel>,
}

impl RatioReport {
    /// Largest relative change of `inf`, `sup` or `sup/inf` over the last refinement.
    pub fn drift(&self) -> f64 {
        let h = &self.refinement_history;
        if h.len() < 2 {
            return 0.0;
        }
        let (a, b) = (&h[h.len() - 2], &h[h.len() - 1]);
        let rel = |x: f64, y: f64| (y / x - 1.0).abs();
        rel(a.inf_ratio, b.inf_ratio)
            .max(rel(a.sup_ratio, b.sup_ratio))
            .max(rel(a.sup_ratio / a.inf_ratio, b.sup_ratio / b.inf_ratio))
    }

    /// Both extremes lie in `[lo, hi]` and the drift is below `max_drift`.
    pub fn within(&self, lo: f64, hi: f64, max_drift: f64) -> bool {
        self.inf_ratio > 0.0
            && self.sup_ratio.is_finite()
            && self.inf_ratio >= lo
            && self.sup_ratio <= hi
            && self.drift() < max_drift
    }
}

fn extremes(rows: &[ScanRow]) -> (ScanRow, ScanRow) {
    let mut lo = rows[0];
    let mut hi = rows[0];
    for r in rows {
        let x = r.log_kernel - r.log_envelope;
        if x < lo.log_kernel - lo.log_envelope {
            lo = *r;
        }
        if x > hi.log_kernel - hi.log_envelope {
            hi = *r;
        }
    }
    (lo, hi)
}

/// Ratio extremes on the scan's grid and on `levels - 1` successive doublings.
pub fn ratio_scan(spec: &ScanSpec, levels: usize, cfg: &EvalConfig) -> Result<RatioReport> {
    if levels == 0 {
        return Err(Error::domain("a ratio scan needs at least one level"));
    }
    let mut s = *spec;
    let mut history = Vec::new();
    let mut last = None;
    for level in 0..levels {
        if level > 0 {
            s = s.doubled();
        }
        let rows = scan_grid(&s, cfg)?;
        let (lo, hi) = extremes(&rows);
        history.push(RefinementLevel {
            grid_size: rows.len(),
            inf_ratio: lo.ratio,
            sup_ratio: hi.ratio,
        });
        last = Some((lo, hi));
    }
    let (lo, hi) = last.expect("at least one level");
    let mut phis = phi_grid(s.phi_points)?;
    if s.derivative {
        phis.retain(|&p| p > 0.0 && p < PI);
    }
    Ok(RatioReport {
        d: s.d,
        derivative: s.derivative,
        t_grid: t_grid(s.t_min, s.t_max, s.t_points)?,
        phi_grid: phis,
        inf_ratio: lo.ratio,
        sup_ratio: hi.ratio,
        arg_inf: (lo.t, lo.phi),
        arg_sup: (hi.t, hi.phi),
        refinement_history: history,
    })
}

pub const CSV_HEADER: [&str; 6] = ["d", "t", "phi", "log_kernel", "log_envelope", "ratio"];

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            format_float(r.t),
            format_float(r.phi),
            format_float(r.log_kernel),
            format_float(r.log_envelope),
            format_float(r.ratio),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// `r(t) = -4t [log K + (d/2) log t + ((d-1)/2) log(t + pi - phi)] / phi^2`,
/// which tends to 1 as `t -> 0` exactly when the Gaussian constant is 4.
pub fn sharpness_probe(d: usize, phi: f64, t_seq: &[f64], cfg: &EvalConfig) -> Result<Vec<f64>> {
    if !(phi > 0.0 && phi < PI) {
        return Err(Error::domain(format!("sharpness probe needs phi in (0, pi), got {phi}")));
    }
    let df = d as f64;
    t_seq
        .iter()
        .map(|&t| {
            let k = kernel_log(&KernelQuery::new(d, t, phi)?, cfg)?.log_abs();
            Ok(-4.0 * t * (k + 0.5 * df * t.ln() + 0.5 * (df - 1.0) * (t + PI - phi).ln()) / (phi * phi))
        })
        .collect()
}

/// `m(t) = K_t^d(pi) t^{(2d-1)/2} e^{pi^2/4t}`, bounded above and below for small `t`.
pub fn antipodal_rate(d: usize, t_seq: &[f64], cfg: &EvalConfig) -> Result<Vec<f64>> {
    let df = d as f64;
    t_seq
        .iter()
        .map(|&t| {
            let k = kernel_log(&KernelQuery::new(d, t, PI)?, cfg)?.log_abs();
            Ok((k + 0.5 * (2.0 * df - 1.0) * t.ln() + PI * PI / (4.0 * t)).exp())
        })
        .collect()
}

/// `I / [t ^ (pi - phi)]^{(n-1)/2}` with
/// `I = int_0^{(pi-phi)/2} [g(g+phi)]^{(n-3)/2} e^{-g(g+phi)/t} (g+phi) dg`.
/// The ratio stays in a fixed band over `0 < t <= 1`, `phi in (0, pi)`.
pub fn comparability_ratio(n: usize, t: f64, phi: f64) -> Result<f64> {
    if n < 2 || !(t > 0.0) || !(phi >= 0.0 && phi < PI) {
        return Err(Error::domain("comparability ratio needs n >= 2, t > 0, phi in [0, pi)"));
    }
    // g(g+phi) = t u^2 turns the integrand into
    // 2 t^{(n-1)/2} u^{n-2} e^{-u^2} (g+phi)/(2g+phi)
    let half = 0.5 * (PI - phi);
    let u_max = (half * (half + phi) / t).sqrt();
    let f = |u: f64| {
        let g = 2.0 * t * u * u / (phi + (phi * phi + 4.0 * t * u * u).sqrt());
        let w = if phi == 0.0 && g == 0.0 { 0.5 } else { (g + phi) / (2.0 * g + phi) };
        2.0 * u.powi(n as i32 - 2) * (-u * u).exp() * w
    };
    let mut total = 0.0;
    let mut a = 0.0;
    while a < u_max {
        let b = (a + 1.0).min(u_max);
        total += quadrature::integrate_adaptive(&f, a, b, 1e-10)?.0;
        a = b;
        if a > 12.0 + n as f64 {
            break;
        }
    }
    let m = t.min(PI - phi);
    Ok(total * (t / m).powf(0.5 * (n as f64 - 1.0)))
}
