//! Local scattering function estimation.
//!
//! A record is cut into overlapping `N x M` regions. Each region is
//! multiplied by every separable DPSS window, mapped to the delay-Doppler
//! domain (unitary DFT over time, unitary inverse DFT over frequency), and
//! the squared magnitudes are averaged uniformly over the windows.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel_io::{ChannelRecord, Sampling};
use crate::error::{Error, Result};
use crate::taper::TaperGrid;

pub const DEFAULT_NOISE_MARGIN_DB: f64 = 10.0;
pub const DEFAULT_GUARD_FRACTION: f64 = 0.25;
pub const DEFAULT_MASK_BLOCK_LEN: usize = 512;

/// Segmentation of a record into overlapping local regions.
///
/// Region `(k_t, k_f)` (zero-based) covers time samples
/// `k_t * delta_t .. k_t * delta_t + n` and frequency samples
/// `k_f * delta_f .. k_f * delta_f + m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionPlan {
    pub n: usize,
    pub m: usize,
    pub delta_t: usize,
    pub delta_f: usize,
    pub k_t_count: usize,
    pub k_f_count: usize,
}

impl RegionPlan {
    pub fn time_start(&self, k_t: usize) -> usize {
        k_t * self.delta_t
    }

    pub fn freq_start(&self, k_f: usize) -> usize {
        k_f * self.delta_f
    }

    pub fn num_regions(&self) -> usize {
        self.k_t_count * self.k_f_count
    }
}

pub fn plan_regions(
    dims: (usize, usize),
    n: usize,
    m: usize,
    delta_t: usize,
    delta_f: usize,
) -> Result<RegionPlan> {
    let (s, q) = dims;
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("region size must be positive".into()));
    }
    if delta_t == 0 || delta_f == 0 {
        return Err(Error::InvalidParameter("region hop must be >= 1".into()));
    }
    if n > s || m > q {
        return Err(Error::InvalidParameter(format!(
            "region {n} x {m} larger than record {s} x {q}"
        )));
    }
    Ok(RegionPlan {
        n,
        m,
        delta_t,
        delta_f,
        k_t_count: (s - n) / delta_t + 1,
        k_f_count: (q - m) / delta_f + 1,
    })
}

/// Grid of local scattering function estimates, indexed `[k_t][k_f]`, each
/// an `N x M` (Doppler x delay) power matrix with the Doppler axis centered.
///
/// Stored as one `(K_t * K_f) x (N * M)` matrix; row `k_t * K_f + k_f` is
/// region `(k_t, k_f)` flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfGrid {
    data: Array2<f64>,
    doppler_axis: Vec<f64>,
    delay_axis: Vec<f64>,
    plan: RegionPlan,
    sampling: Sampling,
    taper_count: usize,
}

impl LsfGrid {
    /// Builds a grid from precomputed region matrices, row-major over `k_t`.
    pub fn from_regions(
        regions: &[Array2<f64>],
        plan: RegionPlan,
        sampling: Sampling,
        taper_count: usize,
    ) -> Result<Self> {
        if regions.len() != plan.num_regions() {
            return Err(Error::DimensionMismatch(format!(
                "{} regions for a {} x {} plan",
                regions.len(),
                plan.k_t_count,
                plan.k_f_count
            )));
        }
        if let Some(bad) = regions.iter().find(|c| c.dim() != (plan.n, plan.m)) {
            return Err(Error::DimensionMismatch(format!(
                "region shape {:?}, plan expects ({}, {})",
                bad.dim(),
                plan.n,
                plan.m
            )));
        }
        if regions.iter().flat_map(|c| c.iter()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "LSF entries must be finite and nonnegative".into(),
            ));
        }
        let mut data = Array2::zeros((plan.num_regions(), plan.n * plan.m));
        for (mut row, c) in data.rows_mut().into_iter().zip(regions) {
            row.iter_mut().zip(c.iter()).for_each(|(d, v)| *d = *v);
        }
        Ok(LsfGrid {
            data,
            doppler_axis: doppler_axis(plan.n, sampling.t_s),
            delay_axis: delay_axis(plan.m, sampling.f_s),
            plan,
            sampling,
            taper_count: taper_count.max(1),
        })
    }

    pub fn plan(&self) -> &RegionPlan {
        &self.plan
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    pub fn taper_count(&self) -> usize {
        self.taper_count
    }

    pub fn doppler_axis(&self) -> &[f64] {
        &self.doppler_axis
    }

    pub fn delay_axis(&self) -> &[f64] {
        &self.delay_axis
    }

    pub fn region(&self, k_t: usize, k_f: usize) -> ArrayView2<'_, f64> {
        let idx = k_t * self.plan.k_f_count + k_f;
        self.data
            .row(idx)
            .into_shape_with_order((self.plan.n, self.plan.m))
            .expect("region rows are contiguous")
    }

    /// All regions flattened, one per row, row-major over `k_t`.
    pub fn flat(&self) -> &Array2<f64> {
        &self.data
    }

    /// Total power of every region, row-major over `k_t`.
    pub fn region_energies(&self) -> Vec<f64> {
        self.data.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Applies `f` to every bin in place.
    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64 + Sync + Send) {
        self.data.par_mapv_inplace(f);
    }
}

/// Centered Doppler axis: bin `p` maps to `(p - floor(N/2)) / (N t_s)`.
pub fn doppler_axis(n: usize, t_s: f64) -> Vec<f64> {
    let half = (n / 2) as f64;
    (0..n).map(|p| (p as f64 - half) / (n as f64 * t_s)).collect()
}

/// Delay axis: bin `l` maps to `l / (M f_s)`.
pub fn delay_axis(m: usize, f_s: f64) -> Vec<f64> {
    (0..m).map(|l| l as f64 / (m as f64 * f_s)).collect()
}

struct RegionTransform {
    fwd_time: Arc<dyn Fft<f64>>,
    inv_freq: Arc<dyn Fft<f64>>,
    n: usize,
    m: usize,
}

impl RegionTransform {
    fn new(n: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        RegionTransform {
            fwd_time: planner.plan_fft_forward(n),
            inv_freq: planner.plan_fft_inverse(m),
            n,
            m,
        }
    }

    /// Multitaper LSF of one region.
    fn estimate(&self, region: ArrayView2<Complex64>, tapers: &TaperGrid, out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let scale = 1.0 / ((n * m) as f64).sqrt();
        let mut acc = vec![0.0f64; n * m];
        let mut by_col = vec![Complex64::default(); n * m];
        let mut by_row = vec![Complex64::default(); n * m];
        let scratch_len = self
            .fwd_time
            .get_inplace_scratch_len()
            .max(self.inv_freq.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::default(); scratch_len];

        for window in tapers.windows() {
            for q in 0..m {
                for s in 0..n {
                    by_col[q * n + s] = region[[s, q]] * window[[s, q]];
                }
            }
            self.fwd_time.process_with_scratch(&mut by_col, &mut scratch);
            for q in 0..m {
                for p in 0..n {
                    by_row[p * m + q] = by_col[q * n + p];
                }
            }
            self.inv_freq.process_with_scratch(&mut by_row, &mut scratch);
            for (a, v) in acc.iter_mut().zip(&by_row) {
                *a += (v * scale).norm_sqr();
            }
        }

        let inv_count = 1.0 / tapers.len() as f64;
        let half = n / 2;
        for p in 0..n {
            let bin = (p + n - half) % n;
            for l in 0..m {
                out[p * m + l] = acc[bin * m + l] * inv_count;
            }
        }
    }
}

pub fn lsf_estimate(record: &ChannelRecord, plan: &RegionPlan, tapers: &TaperGrid) -> Result<LsfGrid> {
    if tapers.dims() != (plan.n, plan.m) {
        return Err(Error::DimensionMismatch(format!(
            "tapers are {:?}, regions are ({}, {})",
            tapers.dims(),
            plan.n,
            plan.m
        )));
    }
    if tapers.is_empty() {
        return Err(Error::InvalidParameter("at least one taper is required".into()));
    }
    let (s, q) = (record.num_times(), record.num_freqs());
    let last_t = plan.time_start(plan.k_t_count - 1) + plan.n;
    let last_f = plan.freq_start(plan.k_f_count - 1) + plan.m;
    if last_t > s || last_f > q {
        return Err(Error::DimensionMismatch(format!(
            "plan spans {last_t} x {last_f} samples, record is {s} x {q}"
        )));
    }

    let transform = RegionTransform::new(plan.n, plan.m);
    let data = record.data();
    let mut flat = Array2::zeros((plan.num_regions(), plan.n * plan.m));
    flat.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(idx, mut out)| {
            let (k_t, k_f) = (idx / plan.k_f_count, idx % plan.k_f_count);
            let t0 = plan.time_start(k_t);
            let f0 = plan.freq_start(k_f);
            let view = data.slice(ndarray::s![t0..t0 + plan.n, f0..f0 + plan.m]);
            transform.estimate(view, tapers, out.as_slice_mut().expect("contiguous row"));
        });

    Ok(LsfGrid {
        data: flat,
        doppler_axis: doppler_axis(plan.n, record.t_s()),
        delay_axis: delay_axis(plan.m, record.f_s()),
        plan: *plan,
        sampling: record.sampling(),
        taper_count: tapers.len(),
    })
}

/// Delay-averaged Doppler profile per region, `(1/M) C 1_M`, averaged over
/// `k_f`. Shape `K_t x N`.
pub fn doppler_power_profile(grid: &LsfGrid) -> Array2<f64> {
    let plan = grid.plan;
    let mut out = Array2::zeros((plan.k_t_count, plan.n));
    let norm = 1.0 / (plan.m * plan.k_f_count) as f64;
    for k_t in 0..plan.k_t_count {
        for k_f in 0..plan.k_f_count {
            let c = grid.region(k_t, k_f);
            for p in 0..plan.n {
                out[[k_t, p]] += c.row(p).sum() * norm;
            }
        }
    }
    out
}

/// Doppler-averaged delay profile per region, `(1/N) 1_N^T C`, averaged over
/// `k_t`. Shape `K_f x M`.
pub fn delay_power_profile(grid: &LsfGrid) -> Array2<f64> {
    let plan = grid.plan;
    let mut out = Array2::zeros((plan.k_f_count, plan.m));
    let norm = 1.0 / (plan.n * plan.k_t_count) as f64;
    for k_t in 0..plan.k_t_count {
        for k_f in 0..plan.k_f_count {
            let c = grid.region(k_t, k_f);
            for l in 0..plan.m {
                out[[k_f, l]] += c.column(l).sum() * norm;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpread {
    /// RMS delay spread, seconds.
    pub tau_rms: f64,
    /// RMS Doppler spread, Hz.
    pub nu_rms: f64,
}

fn central_spread(axis: &[f64], weights: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for (x, w) in axis.iter().zip(weights) {
        total += w;
        first += w * x;
        second += w * x * x;
    }
    let mean = first / total;
    (second / total - mean * mean).max(0.0).sqrt()
}

/// RMS delay and Doppler spreads of every region (row-major over `k_t`).
/// Zero-energy regions yield `None`.
pub fn rms_spreads(grid: &LsfGrid) -> Vec<Option<RegionSpread>> {
    (0..grid.plan.num_regions())
        .map(|idx| {
            let c = grid.region(idx / grid.plan.k_f_count, idx % grid.plan.k_f_count);
            if c.sum() <= 0.0 {
                return None;
            }
            let tau_rms = central_spread(&grid.delay_axis, c.columns().into_iter().map(|col| col.sum()));
            let nu_rms = central_spread(&grid.doppler_axis, c.rows().into_iter().map(|row| row.sum()));
            Some(RegionSpread { tau_rms, nu_rms })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceBounds {
    /// Coherence time, seconds. Infinite for zero Doppler spread.
    pub t_c: f64,
    /// Coherence frequency, Hz. Infinite for zero delay spread.
    pub f_c: f64,
}

/// `T_c = 1 / nu_rms`, `F_c = 1 / tau_rms`.
pub fn coherence_bounds(tau_rms: f64, nu_rms: f64) -> Result<CoherenceBounds> {
    for (name, v) in [("tau_rms", tau_rms), ("nu_rms", nu_rms)] {
        if v.is_nan() || v < 0.0 || v.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let recip = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x };
    Ok(CoherenceBounds {
        t_c: recip(nu_rms),
        f_c: recip(tau_rms),
    })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts a per-sample noise power (as stored in record metadata) to the
/// per-bin noise level of an `n x m` LSF with unit-energy tapers.
pub fn per_bin_noise_db(sample_floor_db: f64, n: usize, m: usize) -> f64 {
    sample_floor_db - linear_to_db((n * m) as f64)
}

fn threshold_level(floor_db: f64, margin_db: f64) -> f64 {
    let level_db = floor_db + margin_db;
    if margin_db == f64::INFINITY || floor_db == f64::INFINITY {
        f64::INFINITY
    } else if level_db.is_nan() || level_db == f64::NEG_INFINITY {
        0.0
    } else {
        db_to_linear(level_db)
    }
}

/// Zeroes every LSF bin below `floor_db + margin_db` (per-bin power, dB).
pub fn noise_threshold(grid: &LsfGrid, floor_db: f64, margin_db: f64) -> LsfGrid {
    let mut out = grid.clone();
    apply_threshold(&mut out, threshold_level(floor_db, margin_db));
    out
}

/// In-place form of [`noise_threshold`].
pub fn noise_threshold_inplace(grid: &mut LsfGrid, floor_db: f64, margin_db: f64) {
    apply_threshold(grid, threshold_level(floor_db, margin_db));
}

fn apply_threshold(grid: &mut LsfGrid, threshold: f64) {
    grid.map_inplace(|v| if v < threshold { 0.0 } else { v });
}

/// Median-based noise floor estimate (per-bin power, dB) from the largest
/// `guard_fraction` of delay bins across all regions and Doppler bins.
///
/// The median of an average of `L` independent exponential bins sits below
/// the mean; it is rescaled by the Wilson-Hilferty median of a
/// Gamma(L, 1/L) variate so that pure noise maps to its mean power.
/// Returns negative infinity when the guard bins are all zero.
pub fn estimate_noise_floor(grid: &LsfGrid, guard_fraction: f64) -> Result<f64> {
    let m = grid.plan.m;
    if m < 4 {
        return Err(Error::InvalidParameter(format!(
            "noise floor estimation needs M >= 4, got {m}"
        )));
    }
    if !(guard_fraction > 0.0 && guard_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "guard fraction must be in (0, 1], got {guard_fraction}"
        )));
    }
    let guard = ((guard_fraction * m as f64).ceil() as usize).clamp(1, m);
    let mut values: Vec<f64> = grid
        .data
        .rows()
        .into_iter()
        .flat_map(|region| {
            region
                .to_vec()
                .into_iter()
                .enumerate()
                .filter(move |(i, _)| i % m >= m - guard)
                .map(|(_, v)| v)
        })
        .collect();
    let mid = values.len() / 2;
    let (_, median, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    if median <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let looks = grid.taper_count as f64;
    let median_over_mean = (1.0 - 1.0 / (9.0 * looks)).powi(3);
    Ok(linear_to_db(median / median_over_mean))
}

/// Open Doppler interval `(lo, hi)` in Hz; either bound may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerInterval {
    #[serde(serialize_with = "bound::serialize", deserialize_with = "bound::lower")]
    pub lo: f64,
    #[serde(serialize_with = "bound::serialize", deserialize_with = "bound::upper")]
    pub hi: f64,
}

impl DopplerInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "empty Doppler interval ({lo}, {hi})"
            )));
        }
        Ok(DopplerInterval { lo, hi })
    }

    pub fn full() -> Self {
        DopplerInterval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, nu: f64) -> bool {
        nu > self.lo && nu < self.hi
    }

    /// Parses `lo,hi` with optional surrounding brackets, e.g. `(-inf,-258)`.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text
            .trim()
            .trim_start_matches(['(', '[', '<'])
            .trim_end_matches([')', ']', '>']);
        let (lo, hi) = trimmed.split_once(',').ok_or_else(|| {
            Error::InvalidParameter(format!("Doppler interval must be 'lo,hi', got '{text}'"))
        })?;
        let parse = |s: &str| -> Result<f64> {
            let s = s.trim();
            match s.to_ascii_lowercase().as_str() {
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
                _ => s
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad Doppler bound '{s}'"))),
            }
        };
        DopplerInterval::new(parse(lo)?, parse(hi)?)
    }
}

impl std::fmt::Display for DopplerInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

mod bound {
    use serde::{Deserialize, Deserializer, Serializer};

    // JSON has no infinities; unbounded ends are stored as null.
    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn lower<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }

    pub fn upper<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Keeps only Doppler content inside `interval`.
///
/// Each frequency column is processed in consecutive time blocks of
/// `block_len` samples (the last one zero-padded): DFT, zero the bins
/// outside the interval, inverse DFT.
pub fn doppler_mask(
    record: &ChannelRecord,
    block_len: usize,
    interval: DopplerInterval,
) -> Result<ChannelRecord> {
    if block_len == 0 {
        return Err(Error::InvalidParameter("mask block length must be >= 1".into()));
    }
    if interval.lo >= interval.hi {
        return Err(Error::InvalidParameter(format!("empty Doppler interval {interval}")));
    }
    let nyquist = record.sampling().doppler_nyquist();
    for bound in [interval.lo, interval.hi] {
        if bound.is_finite() && bound.abs() >= nyquist {
            return Err(Error::DopplerAlias(format!(
                "mask bound {bound} Hz outside representable range +/-{nyquist} Hz"
            )));
        }
    }

    let n = block_len;
    let bin_hz = 1.0 / (n as f64 * record.t_s());
    let positive = n - n / 2;
    let keep: Vec<bool> = (0..n)
        .map(|p| {
            let k = if p < positive { p as f64 } else { p as f64 - n as f64 };
            interval.contains(k * bin_hz)
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let (s_len, q_len) = record.data().dim();
    let input = record.data();

    let columns: Vec<Vec<Complex64>> = (0..q_len)
        .into_par_iter()
        .map(|q| {
            let mut out = Vec::with_capacity(s_len);
            let mut buf = vec![Complex64::default(); n];
            let mut scratch =
                vec![Complex64::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
            for start in (0..s_len).step_by(n) {
                let end = (start + n).min(s_len);
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = if start + i < end {
                        input[[start + i, q]]
                    } else {
                        Complex64::default()
                    };
                }
                fwd.process_with_scratch(&mut buf, &mut scratch);
                for (b, k) in buf.iter_mut().zip(&keep) {
                    if !k {
                        *b = Complex64::default();
                    }
                }
                inv.process_with_scratch(&mut buf, &mut scratch);
                out.extend(buf[..end - start].iter().map(|v| v / n as f64));
            }
            out
        })
        .collect();

    let data = Array2::from_shape_fn((s_len, q_len), |(s, q)| columns[q][s]);
    let label = if record.label().is_empty() {
        format!("doppler mask {interval} Hz, block {n}")
    } else {
        format!("{}; doppler mask {interval} Hz, block {n}", record.label())
    };
    Ok(record.replace_data(data).with_label(label))
}
