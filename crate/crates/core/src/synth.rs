//! Synthetic channel records with known stationarity structure.

use std::f64::consts::PI;

use ndarray::{concatenate, Array2, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_io::{ChannelRecord, Sampling};
use crate::error::{Error, Result};
use crate::lsf::linear_to_db;

pub const DEFAULT_SINUSOIDS: usize = 64;

/// Piecewise-linear function of time. A bare number is a constant; a list of
/// `[time_s, value]` knots is interpolated linearly and held flat outside
/// the first and last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trajectory {
    Constant(f64),
    Knots(Vec<(f64, f64)>),
}

impl Trajectory {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Trajectory::Constant(v) => *v,
            Trajectory::Knots(knots) => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= t);
                let (t0, v0) = knots[i - 1];
                let (t1, v1) = knots[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Minimum and maximum over `[t0, t1]`.
    pub fn range(&self, t0: f64, t1: f64) -> (f64, f64) {
        let mut lo = self.eval(t0).min(self.eval(t1));
        let mut hi = self.eval(t0).max(self.eval(t1));
        if let Trajectory::Knots(knots) = self {
            for &(t, v) in knots {
                if t > t0 && t < t1 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Trajectory::Constant(v) if v.is_finite() => Ok(()),
            Trajectory::Knots(k)
                if !k.is_empty()
                    && k.iter().all(|(t, v)| t.is_finite() && v.is_finite())
                    && k.windows(2).all(|w| w[0].0 < w[1].0) =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidParameter(
                "trajectory needs finite values and strictly increasing knot times".into(),
            )),
        }
    }
}

/// A discrete propagation path with time-varying delay and Doppler shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecularPath {
    /// Complex amplitude, `[re, im]`.
    pub gain: Complex64,
    /// Delay in seconds.
    pub delay: Trajectory,
    /// Doppler shift in Hz.
    pub doppler: Trajectory,
}

impl SpecularPath {
    pub fn fixed(gain: Complex64, delay: f64, doppler: f64) -> Self {
        SpecularPath {
            gain,
            delay: Trajectory::Constant(delay),
            doppler: Trajectory::Constant(doppler),
        }
    }

    fn validate(&self, duration: f64, sampling: Sampling) -> Result<()> {
        self.delay.validate()?;
        self.doppler.validate()?;
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::InvalidParameter("path gain must be finite".into()));
        }
        let (d_lo, d_hi) = self.delay.range(0.0, duration);
        if d_lo < 0.0 || d_hi >= sampling.max_delay() {
            return Err(Error::DelayAlias(format!(
                "path delay range [{d_lo}, {d_hi}] s outside [0, {}) s",
                sampling.max_delay()
            )));
        }
        let (n_lo, n_hi) = self.doppler.range(0.0, duration);
        let nyq = sampling.doppler_nyquist();
        if n_lo.abs() >= nyq || n_hi.abs() >= nyq {
            return Err(Error::DopplerAlias(format!(
                "path Doppler range [{n_lo}, {n_hi}] Hz reaches +/-{nyq} Hz"
            )));
        }
        Ok(())
    }
}

/// `H[s,q] = sum_p g_p exp(j 2 pi nu_p(t) t) exp(-j 2 pi q f_s tau_p(t))`
/// with `t = s t_s`. When `phase_seed` is given every path gain is rotated
/// by an independent uniform phase.
pub fn gen_specular(
    paths: &[SpecularPath],
    dims: (usize, usize),
    sampling: Sampling,
    phase_seed: Option<u64>,
) -> Result<ChannelRecord> {
    sampling.validate()?;
    let (s_len, q_len) = dims;
    let duration = s_len as f64 * sampling.t_s;
    for p in paths {
        p.validate(duration, sampling)?;
    }
    let gains: Vec<Complex64> = match phase_seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            paths
                .iter()
                .map(|p| p.gain * Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
                .collect()
        }
        None => paths.iter().map(|p| p.gain).collect(),
    };

    let rows: Vec<Vec<Complex64>> = (0..s_len)
        .into_par_iter()
        .map(|s| {
            let t = s as f64 * sampling.t_s;
            let mut row = vec![Complex64::default(); q_len];
            for (p, g) in paths.iter().zip(&gains) {
                let nu = p.doppler.eval(t);
                let tau = p.delay.eval(t);
                let a = g * Complex64::from_polar(1.0, 2.0 * PI * nu * t);
                for (q, h) in row.iter_mut().enumerate() {
                    *h += a * Complex64::from_polar(1.0, -2.0 * PI * q as f64 * sampling.f_s * tau);
                }
            }
            row
        })
        .collect();
    let data = Array2::from_shape_fn(dims, |(s, q)| rows[s][q]);
    ChannelRecord::new(data, sampling)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerShape {
    /// Uniform over `[-nu_max, nu_max]`.
    Flat,
    /// Classical U-shaped spectrum.
    Jakes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerProfile {
    pub shape: DopplerShape,
    /// Hz.
    pub nu_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayShape {
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub shape: DelayShape,
    /// Seconds.
    pub tau_rms: f64,
}

/// Tapped-delay-line WSSUS channel, each tap a sum of sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WssusSpec {
    pub doppler: DopplerProfile,
    pub delay: DelayProfile,
    pub num_taps: usize,
    #[serde(default = "default_sinusoids")]
    pub sinusoids: usize,
}

fn default_sinusoids() -> usize {
    DEFAULT_SINUSOIDS
}

impl WssusSpec {
    pub fn new(doppler: DopplerProfile, delay: DelayProfile, num_taps: usize) -> Self {
        WssusSpec {
            doppler,
            delay,
            num_taps,
            sinusoids: DEFAULT_SINUSOIDS,
        }
    }

    pub fn validate(&self, sampling: Sampling) -> Result<()> {
        let nyq = sampling.doppler_nyquist();
        if !(self.doppler.nu_max >= 0.0 && self.doppler.nu_max < nyq) {
            return Err(Error::DopplerAlias(format!(
                "nu_max {} Hz must be in [0, {nyq}) Hz",
                self.doppler.nu_max
            )));
        }
        let limit = 0.25 / sampling.f_s;
        if !(self.delay.tau_rms >= 0.0 && self.delay.tau_rms < limit) {
            return Err(Error::DelayAlias(format!(
                "tau_rms {} s must be in [0, {limit}) s",
                self.delay.tau_rms
            )));
        }
        if self.num_taps == 0 || self.sinusoids == 0 {
            return Err(Error::InvalidParameter(
                "num_taps and sinusoids must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Tap delays (seconds) and unit-sum powers of the exponential profile.
    ///
    /// Taps are evenly spaced over `min(8 tau_rms, 1/f_s)`.
    pub fn taps(&self, sampling: Sampling) -> Vec<(f64, f64)> {
        let span = (8.0 * self.delay.tau_rms).min(sampling.max_delay());
        let spacing = span / self.num_taps as f64;
        let raw: Vec<(f64, f64)> = (0..self.num_taps)
            .map(|k| {
                let tau = k as f64 * spacing;
                let p = if self.delay.tau_rms > 0.0 {
                    (-tau / self.delay.tau_rms).exp()
                } else if k == 0 {
                    1.0
                } else {
                    0.0
                };
                (tau, p)
            })
            .collect();
        let total: f64 = raw.iter().map(|t| t.1).sum();
        raw.into_iter().map(|(tau, p)| (tau, p / total)).collect()
    }
}

struct Sinusoid {
    amplitude: f64,
    freq: f64,
    phase: f64,
}

fn tap_sinusoids(spec: &WssusSpec, power: f64, seed: u64, tap: usize) -> Vec<Sinusoid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tap as u64);
    let l = spec.sinusoids;
    let amplitude = (power / l as f64).sqrt();
    // stratified draws: one frequency per equal-probability cell
    (0..l)
        .map(|i| {
            let u = (i as f64 + rng.random::<f64>()) / l as f64;
            let freq = match spec.doppler.shape {
                DopplerShape::Flat => spec.doppler.nu_max * (2.0 * u - 1.0),
                DopplerShape::Jakes => spec.doppler.nu_max * (2.0 * PI * u).cos(),
            };
            let phase = rng.random_range(0.0..2.0 * PI);
            Sinusoid {
                amplitude,
                freq,
                phase,
            }
        })
        .collect()
}

pub fn gen_wssus(
    spec: &WssusSpec,
    dims: (usize, usize),
    sampling: Sampling,
    seed: u64,
) -> Result<ChannelRecord> {
    sampling.validate()?;
    spec.validate(sampling)?;
    let taps = spec.taps(sampling);
    let sinusoids: Vec<Vec<Sinusoid>> = taps
        .iter()
        .enumerate()
        .map(|(k, &(_, p))| tap_sinusoids(spec, p, seed, k))
        .collect();
    let (s_len, q_len) = dims;
    let steering: Vec<Vec<Complex64>> = taps
        .iter()
        .map(|&(tau, _)| {
            (0..q_len)
                .map(|q| Complex64::from_polar(1.0, -2.0 * PI * q as f64 * sampling.f_s * tau))
                .collect()
        })
        .collect();

    let rows: Vec<Vec<Complex64>> = (0..s_len)
        .into_par_iter()
        .map(|s| {
            let t = s as f64 * sampling.t_s;
            let mut row = vec![Complex64::default(); q_len];
            for (tones, steer) in sinusoids.iter().zip(&steering) {
                let h: Complex64 = tones
                    .iter()
                    .map(|x| Complex64::from_polar(x.amplitude, 2.0 * PI * x.freq * t + x.phase))
                    .sum();
                for (r, st) in row.iter_mut().zip(steer) {
                    *r += h * st;
                }
            }
            row
        })
        .collect();
    let data = Array2::from_shape_fn(dims, |(s, q)| rows[s][q]);
    ChannelRecord::new(data, sampling)
}

/// Specular paths as a piecewise segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecularSet {
    pub paths: Vec<SpecularPath>,
    #[serde(default)]
    pub random_phase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentContent {
    Wssus(WssusSpec),
    Specular(SpecularSet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Seconds. At most one segment may omit it and take the remainder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(flatten)]
    pub content: SegmentContent,
}

/// Seed for the `index`-th derived substream of `seed`; index 0 is `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    if index == 0 {
        return seed;
    }
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn segment_lengths(segments: &[Segment], s_len: usize, t_s: f64) -> Result<Vec<usize>> {
    let open = segments.iter().filter(|s| s.duration.is_none()).count();
    if open > 1 {
        return Err(Error::InvalidParameter(
            "at most one segment may omit its duration".into(),
        ));
    }
    let mut lens = Vec::with_capacity(segments.len());
    for seg in segments {
        match seg.duration {
            Some(d) if d.is_finite() && d > 0.0 => lens.push(Some((d / t_s).round() as usize)),
            Some(d) => {
                return Err(Error::InvalidParameter(format!(
                    "segment duration must be positive, got {d}"
                )))
            }
            None => lens.push(None),
        }
    }
    let fixed: usize = lens.iter().flatten().sum();
    let lens: Vec<usize> = if open == 1 {
        if fixed >= s_len {
            return Err(Error::InvalidParameter(format!(
                "duration mismatch: fixed segments cover {fixed} of {s_len} samples"
            )));
        }
        lens.into_iter().map(|l| l.unwrap_or(s_len - fixed)).collect()
    } else {
        if fixed != s_len {
            return Err(Error::InvalidParameter(format!(
                "duration mismatch: segments cover {fixed} samples, record has {s_len}"
            )));
        }
        lens.into_iter().flatten().collect()
    };
    if lens.contains(&0) {
        return Err(Error::InvalidParameter("segment shorter than one sample".into()));
    }
    Ok(lens)
}

/// Concatenates independent realizations of each segment along time.
/// Segment boundaries (in samples and seconds) are written to the label.
pub fn gen_piecewise(
    segments: &[Segment],
    dims: (usize, usize),
    sampling: Sampling,
    seed: u64,
) -> Result<ChannelRecord> {
    sampling.validate()?;
    if segments.is_empty() {
        return Err(Error::InvalidParameter("no segments".into()));
    }
    let lens = segment_lengths(segments, dims.0, sampling.t_s)?;
    let mut parts = Vec::with_capacity(segments.len());
    for (i, (seg, &len)) in segments.iter().zip(&lens).enumerate() {
        let seg_seed = derive_seed(seed, i as u64);
        let part = match &seg.content {
            SegmentContent::Wssus(spec) => gen_wssus(spec, (len, dims.1), sampling, seg_seed)?,
            SegmentContent::Specular(set) => gen_specular(
                &set.paths,
                (len, dims.1),
                sampling,
                set.random_phase.then_some(seg_seed),
            )?,
        };
        parts.push(part.into_data());
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let data = concatenate(Axis(0), &views).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut start = 0;
    let bounds: Vec<String> = lens
        .iter()
        .map(|&l| {
            let b = format!(
                "[{start},{}) {:.6}-{:.6}s",
                start + l,
                start as f64 * sampling.t_s,
                (start + l) as f64 * sampling.t_s
            );
            start += l;
            b
        })
        .collect();
    Ok(ChannelRecord::new(data, sampling)?.with_label(format!("segments {}", bounds.join(" "))))
}

/// Sample indices where each segment after the first begins.
pub fn segment_boundaries(segments: &[Segment], s_len: usize, t_s: f64) -> Result<Vec<usize>> {
    let lens = segment_lengths(segments, s_len, t_s)?;
    Ok(lens
        .iter()
        .scan(0, |acc, l| {
            *acc += l;
            Some(*acc)
        })
        .take(lens.len() - 1)
        .collect())
}

/// Adds circular white Gaussian noise at `snr_db` relative to the record's
/// mean power and records the per-sample noise power in `noise_floor_db`.
/// An infinite SNR leaves the record unchanged.
pub fn add_noise(record: &ChannelRecord, snr_db: f64, seed: u64) -> Result<ChannelRecord> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("invalid SNR {snr_db} dB")));
    }
    let signal = record.mean_power();
    if snr_db == f64::INFINITY || signal == 0.0 {
        return Ok(record.clone());
    }
    let noise_power = signal / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = record.data().clone();
    for v in data.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(re * sigma, im * sigma);
    }
    Ok(record
        .replace_data(data)
        .with_noise_floor_db(Some(linear_to_db(noise_power))))
}

/// Scenario description consumed by the `synth` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub t_s: f64,
    pub f_s: f64,
    #[serde(default)]
    pub f_carrier: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub label: String,
    pub segments: Vec<Segment>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("scenario: {e}")))
    }

    pub fn generate(&self) -> Result<ChannelRecord> {
        if self.s == 0 || self.q == 0 {
            return Err(Error::InvalidRecord(format!("empty record ({} x {})", self.s, self.q)));
        }
        let sampling = Sampling::new(self.t_s, self.f_s)?;
        let mut rec = gen_piecewise(&self.segments, (self.s, self.q), sampling, self.seed)?;
        if let Some(snr) = self.snr_db {
            rec = add_noise(&rec, snr, derive_seed(self.seed, u64::MAX))?;
        }
        let label = if self.label.is_empty() {
            rec.label().to_string()
        } else {
            format!("{}; {}", self.label, rec.label())
        };
        Ok(rec.with_carrier(self.f_carrier).with_label(label))
    }
}
