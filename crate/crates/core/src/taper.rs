//! Discrete prolate spheroidal sequences and separable time-frequency tapers.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Default time-bandwidth product in the time (Doppler) dimension.
pub const DEFAULT_A_TIME: f64 = 2.0;
/// Default time-bandwidth product in the frequency (delay) dimension.
pub const DEFAULT_A_FREQ: f64 = 2.5;
pub const DEFAULT_TAPERS: usize = 2;

const SIGN_EPS: f64 = 1e-8;
const INVERSE_ITERATIONS: usize = 8;

/// The `k` most concentrated Slepian sequences of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpssSet {
    length: usize,
    half_bandwidth_product: f64,
    tapers: Vec<Vec<f64>>,
    concentrations: Vec<f64>,
}

impl DpssSet {
    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn half_bandwidth_product(&self) -> f64 {
        self.half_bandwidth_product
    }

    pub fn count(&self) -> usize {
        self.tapers.len()
    }

    pub fn taper(&self, k: usize) -> &[f64] {
        &self.tapers[k]
    }

    pub fn tapers(&self) -> &[Vec<f64>] {
        &self.tapers
    }

    /// Fraction of each taper's energy inside `|f| <= W`, descending.
    pub fn concentrations(&self) -> &[f64] {
        &self.concentrations
    }

    /// More tapers than `floor(2a)` have poor leakage protection.
    pub fn exceeds_shannon_number(&self) -> bool {
        self.count() > (2.0 * self.half_bandwidth_product).floor() as usize
    }
}

/// Computes `k` DPSS tapers of length `n` with time-half-bandwidth product `a`
/// (normalized half bandwidth `W = a / n`).
///
/// The tapers are eigenvectors of the commuting symmetric tridiagonal matrix
/// with diagonal `((n-1-2i)/2)^2 cos(2 pi W)` and off-diagonal `i(n-i)/2`,
/// found by Sturm bisection and inverse iteration.
pub fn dpss(n: usize, a: f64, k: usize) -> Result<DpssSet> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dpss length must be >= 2, got {n}")));
    }
    if !(a > 0.0 && a < n as f64 / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "time-bandwidth product must satisfy 0 < a < n/2 = {}, got {a}",
            n as f64 / 2.0
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "taper count must be in 1..={n}, got {k}"
        )));
    }
    let w = a / n as f64;
    let cos_w = (2.0 * PI * w).cos();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let c = (n as f64 - 1.0 - 2.0 * i as f64) / 2.0;
            c * c * cos_w
        })
        .collect();
    let off: Vec<f64> = (1..n).map(|i| (i * (n - i)) as f64 / 2.0).collect();
    let tri = SymTridiagonal { diag, off };

    let mut tapers: Vec<Vec<f64>> = Vec::with_capacity(k);
    for order in 0..k {
        let lambda = tri.eigenvalue_ascending(n - 1 - order);
        let mut v = tri.inverse_iteration(lambda, &tapers)?;
        canonicalize_sign(&mut v);
        tapers.push(v);
    }
    let concentrations = tapers.iter().map(|v| band_concentration(v, w)).collect();
    Ok(DpssSet {
        length: n,
        half_bandwidth_product: a,
        tapers,
        concentrations,
    })
}

/// Energy of `v` in `|f| <= w` (cycles/sample), integrated in closed form
/// from the autocorrelation of `v`.
pub fn band_concentration(v: &[f64], w: f64) -> f64 {
    let n = v.len();
    let mut total = 2.0 * w * v.iter().map(|x| x * x).sum::<f64>();
    for lag in 1..n {
        let r: f64 = v[..n - lag].iter().zip(&v[lag..]).map(|(x, y)| x * y).sum();
        total += 2.0 * r * (2.0 * PI * w * lag as f64).sin() / (PI * lag as f64);
    }
    total
}

fn canonicalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    fn n(&self) -> usize {
        self.diag.len()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            let prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `idx`-th smallest eigenvalue by bisection.
    fn eigenvalue_ascending(&self, idx: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        lo -= scale * 1e-12;
        hi += scale * 1e-12;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for `lambda`, orthogonalized against `previous`.
    fn inverse_iteration(&self, lambda: f64, previous: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.n();
        let norm = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let lu = TridiagonalLu::factor(self, lambda, norm * f64::EPSILON);

        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7 + 0.3).sin())
            .collect();
        normalize(&mut v);
        for _ in 0..INVERSE_ITERATIONS {
            let mut x = v.clone();
            lu.solve(&mut x);
            for p in previous {
                let d = dot(&x, p);
                x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= d * pi);
            }
            let nrm = normalize(&mut x);
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(Error::NoConvergence(format!(
                    "inverse iteration broke down at eigenvalue {lambda}"
                )));
            }
            let sign = if dot(&x, &v) < 0.0 { -1.0 } else { 1.0 };
            let change: f64 = x
                .iter()
                .zip(&v)
                .map(|(a, b)| (sign * a - b).abs())
                .fold(0.0, f64::max);
            v = x;
            if change < 1e-15 {
                break;
            }
        }
        Ok(v)
    }
}

/// LU factorization with partial pivoting of `T - shift * I`.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(t: &SymTridiagonal, shift: f64, tiny: f64) -> Self {
        let n = t.n();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut d: Vec<f64> = t.diag.iter().map(|x| x - shift).collect();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for p in d.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        TridiagonalLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 && nrm.is_finite() {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Separable 2-D tapers `G_w[s', q'] = u_i[s'] * u~_j[q']` with `w = i*J + j`
/// (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct TaperGrid {
    time_len: usize,
    freq_len: usize,
    time_count: usize,
    freq_count: usize,
    windows: Vec<Array2<f64>>,
}

impl TaperGrid {
    /// Window shape `(N, M)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.time_len, self.freq_len)
    }

    /// `(I, J)`.
    pub fn counts(&self) -> (usize, usize) {
        (self.time_count, self.freq_count)
    }

    pub fn windows(&self) -> &[Array2<f64>] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

pub fn taper_grid(time_set: &DpssSet, freq_set: &DpssSet) -> TaperGrid {
    let (n, m) = (time_set.len(), freq_set.len());
    let mut windows = Vec::with_capacity(time_set.count() * freq_set.count());
    for u in time_set.tapers() {
        for v in freq_set.tapers() {
            windows.push(Array2::from_shape_fn((n, m), |(s, q)| u[s] * v[q]));
        }
    }
    TaperGrid {
        time_len: n,
        freq_len: m,
        time_count: time_set.count(),
        freq_count: freq_set.count(),
        windows,
    }
}

/// Builds the DPSS tapers for both dimensions and assembles the grid.
pub fn build_tapers(
    n: usize,
    m: usize,
    a_t: f64,
    a_f: f64,
    count_t: usize,
    count_f: usize,
) -> Result<TaperGrid> {
    let time_set = dpss(n, a_t, count_t)?;
    let freq_set = dpss(m, a_f, count_f)?;
    Ok(taper_grid(&time_set, &freq_set))
}
