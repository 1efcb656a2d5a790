//! The coefficient functions `Phi_{N,j}` in
//! `D_z^N F(vz) = sum_{j=1}^N v^{2j} (L^j F)(vz) Phi_{N,j}(z)`
//! for even entire `F`.
//!
//! Tables are built from the recurrence
//! `Phi_{N+1,j} = (z/sin z) Phi_{N,j-1} + (1/sin z) Phi'_{N,j}`
//! with exact rational coefficients and memoized per order.

use std::sync::{Arc, OnceLock};

use num_traits::ToPrimitive;

use super::expr::{Hyp, TrigExpr};
use super::laurent::z_over_sin_series;
use crate::error::{Error, Result};

/// Default largest table order (covers odd dimensions up to 33).
pub const DEFAULT_ORDER_CAP: usize = 16;
/// Hard limit on any configured cap.
pub const MAX_ORDER: usize = 32;

/// Number of Taylor coefficients (in powers of `z^2`) used for `|z| <= TAYLOR_RADIUS`.
const TAYLOR_TERMS: usize = 80;
const TAYLOR_BASE: usize = TAYLOR_TERMS + MAX_ORDER + 1;
const TAYLOR_RADIUS: f64 = 1.0;

#[derive(Debug)]
struct CompiledEntry {
    // (coeff, pow_z, pow_cos, pow_sin_inv)
    terms: Vec<(f64, i32, i32, i32)>,
    // Taylor coefficients in z^2; all nonnegative
    taylor: Vec<f64>,
}

impl CompiledEntry {
    fn eval(&self, z: f64, trig: &TrigPowers) -> f64 {
        let az = z.abs();
        if az <= TAYLOR_RADIUS {
            let w = z * z;
            return self.taylor[..TAYLOR_TERMS].iter().rev().fold(0.0, |acc, &c| acc * w + c);
        }
        self.terms
            .iter()
            .map(|&(c, a, b, s)| c * trig.z(a) * trig.cos(b) * trig.inv_sin(s))
            .sum()
    }
}

/// Cached integer powers of `z`, `cos z`, `1/sin z` at a point.
struct TrigPowers {
    z: Vec<f64>,
    cos: Vec<f64>,
    inv_sin: Vec<f64>,
}

impl TrigPowers {
    fn new(x: f64, max_pow: usize) -> Self {
        let (s, c) = x.sin_cos();
        let powers = |base: f64| {
            let mut v = Vec::with_capacity(max_pow + 1);
            let mut p = 1.0;
            for _ in 0..=max_pow {
                v.push(p);
                p *= base;
            }
            v
        };
        TrigPowers {
            z: powers(x),
            cos: powers(c),
            inv_sin: powers(1.0 / s),
        }
    }

    fn z(&self, a: i32) -> f64 {
        self.z[a as usize]
    }

    fn cos(&self, b: i32) -> f64 {
        self.cos[b as usize]
    }

    fn inv_sin(&self, s: i32) -> f64 {
        self.inv_sin[s as usize]
    }
}

/// `Phi_{N,1} ..= Phi_{N,N}` for one order `N`.
#[derive(Debug)]
pub struct PhiTable {
    order: usize,
    entries: Vec<TrigExpr>,
    compiled: Vec<CompiledEntry>,
    // full-length Taylor series in z^2, needed to build the next order
    series: Vec<Vec<f64>>,
}

impl PhiTable {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `Phi_{N,j}` for `j` in `1..=N`.
    ///
    /// # Panics
    /// If `j` is outside `1..=N`.
    pub fn entry(&self, j: usize) -> &TrigExpr {
        assert!((1..=self.order).contains(&j), "j = {j} outside 1..={}", self.order);
        &self.entries[j - 1]
    }

    pub fn entries(&self) -> &[TrigExpr] {
        &self.entries
    }

    /// Taylor coefficients of `Phi_{N,j}` in powers of `z^2`.
    pub fn taylor_coeffs(&self, j: usize) -> &[f64] {
        &self.compiled[j - 1].taylor[..TAYLOR_TERMS]
    }

    fn max_power(&self) -> usize {
        self.compiled
            .iter()
            .flat_map(|e| e.terms.iter())
            .map(|&(_, a, b, s)| a.max(b).max(s) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Fast floating evaluation of `Phi_{N,j}(z)`; no pole check.
    pub fn eval(&self, j: usize, z: f64) -> f64 {
        let trig = TrigPowers::new(z, self.max_power());
        self.compiled[j - 1].eval(z, &trig)
    }

    /// Writes `Phi_{N,j}(z)` for `j = 1..=N` into `out[0..N]`.
    pub fn eval_into(&self, z: f64, out: &mut [f64]) {
        let trig = if z.abs() > TAYLOR_RADIUS {
            TrigPowers::new(z, self.max_power())
        } else {
            TrigPowers::new(0.0, 0)
        };
        for (o, e) in out.iter_mut().zip(&self.compiled) {
            *o = e.eval(z, &trig);
        }
    }

    fn first() -> PhiTable {
        Self::assemble(1, vec![TrigExpr::z_over_sin()], vec![z_over_sin_taylor(TAYLOR_BASE)])
    }

    fn next(&self) -> PhiTable {
        let n = self.order;
        let zos = TrigExpr::z_over_sin();
        let inv_sin = TrigExpr::inv_sin();
        let base = &PhiCache::global_first().series[0];
        let zero = TrigExpr::zero();
        let mut entries = Vec::with_capacity(n + 1);
        let mut series = Vec::with_capacity(n + 1);
        for j in 1..=n + 1 {
            let prev = if j >= 2 { &self.entries[j - 2] } else { &zero };
            let same = if j <= n { &self.entries[j - 1] } else { &zero };
            let e = &(&zos * prev) + &(&inv_sin * &same.differentiate());
            entries.push(e);

            // same recurrence on Taylor data: Z*S_{N,j-1} + Z*(S'_{N,j}/z)
            let len = self.series[0].len() - 1;
            let mut acc = vec![0.0; len];
            if j >= 2 {
                add_product(&mut acc, base, &self.series[j - 2]);
            }
            if j <= n {
                let s = &self.series[j - 1];
                let deriv: Vec<f64> = (0..len).map(|k| 2.0 * (k + 1) as f64 * s[k + 1]).collect();
                add_product(&mut acc, base, &deriv);
            }
            series.push(acc);
        }
        Self::assemble(n + 1, entries, series)
    }

    fn assemble(order: usize, entries: Vec<TrigExpr>, series: Vec<Vec<f64>>) -> PhiTable {
        let compiled = entries
            .iter()
            .zip(&series)
            .map(|(e, s)| CompiledEntry {
                terms: e
                    .terms()
                    .map(|t| {
                        debug_assert_eq!(t.key.hyp, Hyp::None);
                        (
                            t.coeff.to_f64().unwrap(),
                            t.key.pow_z,
                            t.key.pow_cos as i32,
                            t.key.pow_sin_inv as i32,
                        )
                    })
                    .collect(),
                taylor: s.clone(),
            })
            .collect();
        PhiTable {
            order,
            entries,
            compiled,
            series,
        }
    }
}

/// Taylor coefficients of `z/sin z` in powers of `z^2`.
///
/// Low orders are exact; from `z^14` on the partial-fraction form
/// `2 sum_n (-1)^{n+1} (n pi)^{-2k}` converges after a few dozen terms.
fn z_over_sin_taylor(len: usize) -> Vec<f64> {
    const EXACT: usize = 7;
    let exact = z_over_sin_series(2 * EXACT);
    (0..len)
        .map(|k| {
            if k < EXACT {
                exact[2 * k].to_f64().unwrap()
            } else {
                let mut s = 0.0;
                for n in (1..=40).rev() {
                    let term = (n as f64 * std::f64::consts::PI).powi(-2 * k as i32);
                    s += if n % 2 == 1 { term } else { -term };
                }
                2.0 * s
            }
        })
        .collect()
}

fn add_product(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let n = acc.len();
    for (i, &x) in a.iter().enumerate().take(n) {
        for (j, &y) in b.iter().enumerate().take(n - i) {
            acc[i + j] += x * y;
        }
    }
}

/// Memoized tables with a configurable order cap.
///
/// Each order is built at most once; concurrent requests for the same order
/// block on a single construction.
#[derive(Debug)]
pub struct PhiCache {
    cap: usize,
    cells: Vec<OnceLock<Arc<PhiTable>>>,
}

static GLOBAL: OnceLock<PhiCache> = OnceLock::new();

impl PhiCache {
    /// # Panics
    /// If `cap` is zero or above [`MAX_ORDER`].
    pub fn new(cap: usize) -> Self {
        assert!((1..=MAX_ORDER).contains(&cap), "order cap must be in 1..={MAX_ORDER}");
        PhiCache {
            cap,
            cells: (0..cap).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Process-wide cache with [`DEFAULT_ORDER_CAP`].
    pub fn global() -> &'static PhiCache {
        GLOBAL.get_or_init(|| PhiCache::new(DEFAULT_ORDER_CAP))
    }

    fn global_first() -> Arc<PhiTable> {
        Self::global().get(1).expect("order 1 is always within the cap")
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn get(&self, n: usize) -> Result<Arc<PhiTable>> {
        if n == 0 {
            return Err(Error::domain("Phi table order must be at least 1"));
        }
        if n > self.cap {
            return Err(Error::Capability {
                what: format!("Phi table order {n}"),
                cap: self.cap,
            });
        }
        Ok(self.cells[n - 1]
            .get_or_init(|| {
                if n == 1 {
                    Arc::new(PhiTable::first())
                } else {
                    let prev = self.get(n - 1).expect("lower orders are within the cap");
                    Arc::new(prev.next())
                }
            })
            .clone())
    }

    /// Tables for orders `1..=n`.
    pub fn stack(&self, n: usize) -> Result<PhiStack> {
        let tables = (1..=n).map(|m| self.get(m)).collect::<Result<Vec<_>>>()?;
        Ok(PhiStack { tables })
    }
}

/// Exact symbolic table of order `n` from the global cache.
pub fn phi_table(n: usize) -> Result<Arc<PhiTable>> {
    PhiCache::global().get(n)
}

/// Tables for all orders up to some `N`.
#[derive(Debug, Clone)]
pub struct PhiStack {
    tables: Vec<Arc<PhiTable>>,
}

impl PhiStack {
    pub fn max_order(&self) -> usize {
        self.tables.len()
    }

    /// Evaluates every `Phi_{m,j}(x)`, `1 <= j <= m <= N`.
    pub fn values_at(&self, x: f64) -> PhiValues {
        let n = self.tables.len();
        let mut vals = vec![0.0; n * (n + 1) / 2];
        for (m, t) in self.tables.iter().enumerate() {
            let off = m * (m + 1) / 2;
            t.eval_into(x, &mut vals[off..off + m + 1]);
        }
        PhiValues { n, vals }
    }
}

/// All `Phi_{m,j}` values at one point.
#[derive(Debug, Clone)]
pub struct PhiValues {
    n: usize,
    vals: Vec<f64>,
}

impl PhiValues {
    pub fn max_order(&self) -> usize {
        self.n
    }

    /// `Phi_{m,j}` for `1 <= j <= m <= N`.
    #[inline]
    pub fn get(&self, m: usize, j: usize) -> f64 {
        debug_assert!(j >= 1 && j <= m && m <= self.n);
        self.vals[(m - 1) * m / 2 + j - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig_algebra::expr::{rat, TermKey};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn order_one() {
        let t = phi_table(1).unwrap();
        assert_eq!(t.entry(1), &TrigExpr::z_over_sin());
        assert!((t.eval(1, FRAC_PI_2) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn order_two() {
        let t = phi_table(2).unwrap();
        assert_eq!(t.entry(2), &TrigExpr::z_over_sin().pow(2));
        let expected = &TrigExpr::monomial(rat(1), TermKey::new(0, 0, 2))
            - &TrigExpr::monomial(rat(1), TermKey::new(1, 1, 3));
        assert_eq!(t.entry(1), &expected);
        assert!((t.eval(1, FRAC_PI_2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let c = PhiCache::new(3);
        assert!(c.get(3).is_ok());
        assert!(matches!(c.get(4), Err(Error::Capability { cap: 3, .. })));
        assert!(phi_table(DEFAULT_ORDER_CAP + 1).is_err());
    }

    #[test]
    fn taylor_and_termwise_agree_at_the_seam() {
        for n in 1..=6 {
            let t = phi_table(n).unwrap();
            for j in 1..=n {
                let z = TAYLOR_RADIUS;
                let termwise = t.entry(j).eval_termwise(z, 1.0);
                let taylor = t.eval(j, z * (1.0 - 1e-15));
                assert!(
                    (termwise - taylor).abs() <= 1e-11 * taylor.abs(),
                    "N={n} j={j}: {termwise} vs {taylor}"
                );
            }
        }
    }

    #[test]
    fn z_over_sin_taylor_matches_exact_series() {
        let exact = z_over_sin_series(40);
        let fast = z_over_sin_taylor(21);
        for k in 0..=20 {
            let e = exact[2 * k].to_f64().unwrap();
            assert!((fast[k] - e).abs() <= 4e-15 * e, "k={k}: {} vs {e}", fast[k]);
        }
    }

    #[test]
    fn taylor_coefficients_are_nonnegative() {
        let t = phi_table(5).unwrap();
        for j in 1..=5 {
            assert!(t.taylor_coeffs(j).iter().all(|&c| c >= 0.0));
        }
    }

    #[test]
    fn concurrent_requests_share_one_table() {
        let cache = Arc::new(PhiCache::new(6));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let c = cache.clone();
                std::thread::spawn(move || c.get(6).unwrap())
            })
            .collect();
        let tables: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(tables.windows(2).all(|w| Arc::ptr_eq(&w[0], &w[1])));
    }

    #[test]
    fn stack_values_layout() {
        let s = PhiCache::global().stack(3).unwrap();
        let v = s.values_at(2.0);
        assert!((v.get(1, 1) - 2.0 / 2f64.sin()).abs() < 1e-14);
        assert!((v.get(3, 3) - (2.0 / 2f64.sin()).powi(3)).abs() < 1e-12);
        let _ = PI;
    }
}
