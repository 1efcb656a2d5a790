//! Brownian motion on `S^d` sampled exactly in distribution: the angle of
//! each increment by inverse transform on its CDF, the direction uniformly
//! on the tangent sphere.

mod cdf;
mod ks;

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_kernel::EvalConfig;

pub use cdf::{log_angle_density, AngleCDF, DEFAULT_GRID};
pub use ks::{ks_critical, ks_one_sample, ks_two_sample, KsReport};

/// Samples drawn per random stream in parallel runs.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Normalizes `coords`, which must be nonzero and have at least two entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if coords.len() < 2 || !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::domain("a sphere point needs a finite nonzero vector in R^{d+1}, d >= 1"));
        }
        Ok(SpherePoint {
            coords: coords.into_iter().map(|x| x / norm).collect(),
        })
    }

    /// `(0, ..., 0, 1)` on `S^d`.
    pub fn north_pole(d: usize) -> Self {
        let mut coords = vec![0.0; d + 1];
        coords[d] = 1.0;
        SpherePoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Geodesic distance, accurate for nearby and for antipodal points.
    pub fn angle_to(&self, other: &SpherePoint) -> f64 {
        let diff: f64 = self.coords.iter().zip(&other.coords).map(|(a, b)| (a - b) * (a - b)).sum();
        let sum: f64 = self.coords.iter().zip(&other.coords).map(|(a, b)| (a + b) * (a + b)).sum();
        2.0 * diff.sqrt().atan2(sum.sqrt())
    }
}

/// Increments of spherical Brownian motion over a fixed time step.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: AngleCDF,
    angle_scale: f64,
}

impl Sampler {
    pub fn new(d: usize, t: f64, cfg: &EvalConfig) -> Result<Self> {
        Ok(Self::from_cdf(AngleCDF::new(d, t, DEFAULT_GRID, cfg)?))
    }

    pub fn from_cdf(cdf: AngleCDF) -> Self {
        Sampler { cdf, angle_scale: 1.0 }
    }

    /// Multiplies every drawn angle by `scale` (capped at pi): a wrong
    /// sampler that statistical tests should reject.
    pub fn corrupted(mut self, scale: f64) -> Self {
        self.angle_scale = scale;
        self
    }

    pub fn cdf(&self) -> &AngleCDF {
        &self.cdf
    }

    pub fn sample_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        (self.cdf.quantile(u) * self.angle_scale).min(PI)
    }

    /// `cos(phi) x + sin(phi) u` with `u` uniform on the unit tangent sphere at `x`.
    pub fn step<R: Rng + ?Sized>(&self, x: &SpherePoint, rng: &mut R) -> SpherePoint {
        let phi = self.sample_angle(rng);
        step_by(x, phi, rng)
    }
}

/// Moves `x` by the geodesic angle `phi` in a uniformly random direction.
pub fn step_by<R: Rng + ?Sized>(x: &SpherePoint, phi: f64, rng: &mut R) -> SpherePoint {
    let u = loop {
        let g: Vec<f64> = (0..x.coords.len()).map(|_| rng.sample(StandardNormal)).collect();
        let along: f64 = g.iter().zip(&x.coords).map(|(a, b)| a * b).sum();
        let mut v: Vec<f64> = g.iter().zip(&x.coords).map(|(a, b)| a - along * b).collect();
        // second pass removes what rounding left along x
        let along: f64 = v.iter().zip(&x.coords).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(&x.coords).for_each(|(a, b)| *a -= along * b);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            break v.into_iter().map(|a| a / norm).collect::<Vec<f64>>();
        }
    };
    let (s, c) = phi.sin_cos();
    let y: Vec<f64> = x.coords.iter().zip(&u).map(|(a, b)| c * a + s * b).collect();
    let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    SpherePoint {
        coords: y.into_iter().map(|a| a / norm).collect(),
    }
}

/// Seeded generator on stream `stream`; distinct streams are independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` values of `f`, each block of samples drawn from its own stream so the
/// result does not depend on the thread count.
fn parallel_draw<T: Send>(n: usize, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = rng_for(seed, b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// A path of `n` steps from the north pole, starting point included.
pub fn sample_path(sampler: &Sampler, n: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = rng_for(seed, 0);
    let mut x = SpherePoint::north_pole(sampler.cdf.d);
    let mut path = Vec::with_capacity(n + 1);
    path.push(x.clone());
    for _ in 0..n {
        x = sampler.step(&x, &mut rng);
        path.push(x.clone());
    }
    path
}

/// CSV with columns `step,x0,...,xd`.
pub fn write_path_csv<W: Write>(path: &[SpherePoint], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let dim = path.first().map_or(0, |p| p.coords.len());
    let mut header = vec!["step".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(io)?;
    for (i, p) in path.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(p.coords.iter().map(|x| format!("{x:.16e}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// One-sample KS test of `n` sampled angles against the sampler's own CDF.
pub fn angle_ks_test(sampler: &Sampler, n: usize, seed: u64, alpha: f64) -> KsReport {
    let mut xs = parallel_draw(n, seed, |rng| sampler.sample_angle(rng));
    let stat = ks_one_sample(&mut xs, |p| sampler.cdf.eval(p));
    KsReport::one_sample(n, stat, alpha)
}

/// Two-sample KS test comparing the distance from the start after one step
/// of time `t` with that after two steps of `t/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChapmanKolmogorovReport {
    pub d: usize,
    pub t: f64,
    pub ks: KsReport,
}

/// `one_step` must sample time `t` and `half_step` time `t/2` in the same dimension.
pub fn chapman_kolmogorov_test(
    one_step: &Sampler,
    half_step: &Sampler,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<ChapmanKolmogorovReport> {
    let (a, b) = (&one_step.cdf, &half_step.cdf);
    if a.d != b.d || (a.t - 2.0 * b.t).abs() > 1e-12 * a.t {
        return Err(Error::domain("the half-step sampler must use half the time in the same dimension"));
    }
    if n < 10_000 {
        return Err(Error::domain(format!("the Chapman-Kolmogorov test needs at least 1e4 samples, got {n}")));
    }
    let x0 = SpherePoint::north_pole(a.d);
    let mut direct = parallel_draw(n, seed, |rng| one_step.sample_angle(rng));
    // independent streams for the second leg
    let mut composed = parallel_draw(n, seed ^ 0x9e37_79b9_7f4a_7c15, |rng| {
        let y = half_step.step(&x0, rng);
        half_step.step(&y, rng).angle_to(&x0)
    });
    let stat = ks_two_sample(&mut direct, &mut composed);
    Ok(ChapmanKolmogorovReport {
        d: a.d,
        t: a.t,
        ks: KsReport::two_sample(n, n, stat, alpha),
    })
}
