//! On-disk channel record format.
//!
//! A record is stored as two files sharing a stem: `<stem>.json` holds the
//! metadata and `<stem>.bin` holds the transfer function as little-endian
//! `f32` pairs (real, imaginary), row-major over time.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const BYTES_PER_ENTRY: u64 = 8;

/// Time and frequency sampling intervals of a channel record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    /// Seconds between snapshots.
    pub t_s: f64,
    /// Hz between frequency bins.
    pub f_s: f64,
}

impl Sampling {
    pub fn new(t_s: f64, f_s: f64) -> Result<Self> {
        let s = Sampling { t_s, f_s };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::InvalidRecord(format!("t_s must be > 0, got {}", self.t_s)));
        }
        if !(self.f_s.is_finite() && self.f_s > 0.0) {
            return Err(Error::InvalidRecord(format!("f_s must be > 0, got {}", self.f_s)));
        }
        Ok(())
    }

    /// Largest representable Doppler magnitude, `1 / (2 t_s)`.
    pub fn doppler_nyquist(&self) -> f64 {
        0.5 / self.t_s
    }

    /// Unambiguous delay range, `1 / f_s`.
    pub fn max_delay(&self) -> f64 {
        1.0 / self.f_s
    }
}

/// Sampled time-variant transfer function `H[s, q]` with its metadata.
///
/// Rows index time snapshots, columns index frequency bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    data: Array2<Complex64>,
    sampling: Sampling,
    f_carrier: f64,
    noise_floor_db: Option<f64>,
    label: String,
}

impl ChannelRecord {
    pub fn new(data: Array2<Complex64>, sampling: Sampling) -> Result<Self> {
        let (s, q) = data.dim();
        if s == 0 || q == 0 {
            return Err(Error::InvalidRecord(format!("empty record ({s} x {q})")));
        }
        sampling.validate()?;
        if let Some(((row, col), _)) = data
            .indexed_iter()
            .find(|(_, v)| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite { row, col });
        }
        Ok(ChannelRecord {
            data,
            sampling,
            f_carrier: 0.0,
            noise_floor_db: None,
            label: String::new(),
        })
    }

    pub fn with_carrier(mut self, f_carrier: f64) -> Self {
        self.f_carrier = f_carrier;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Sets the per-sample noise power reference. Non-finite values clear it.
    pub fn with_noise_floor_db(mut self, floor: Option<f64>) -> Self {
        self.noise_floor_db = floor.filter(|f| f.is_finite());
        self
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    pub fn t_s(&self) -> f64 {
        self.sampling.t_s
    }

    pub fn f_s(&self) -> f64 {
        self.sampling.f_s
    }

    pub fn f_carrier(&self) -> f64 {
        self.f_carrier
    }

    pub fn noise_floor_db(&self) -> Option<f64> {
        self.noise_floor_db
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of time snapshots `S`.
    pub fn num_times(&self) -> usize {
        self.data.nrows()
    }

    /// Number of frequency bins `Q`.
    pub fn num_freqs(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration(&self) -> f64 {
        self.num_times() as f64 * self.sampling.t_s
    }

    pub fn bandwidth(&self) -> f64 {
        self.num_freqs() as f64 * self.sampling.f_s
    }

    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// Same metadata, new data of identical shape.
    pub(crate) fn replace_data(&self, data: Array2<Complex64>) -> Self {
        debug_assert_eq!(data.dim(), self.data.dim());
        ChannelRecord {
            data,
            sampling: self.sampling,
            f_carrier: self.f_carrier,
            noise_floor_db: self.noise_floor_db,
            label: self.label.clone(),
        }
    }

    fn metadata(&self) -> RecordMetadata {
        RecordMetadata {
            format_version: FORMAT_VERSION,
            s: self.num_times(),
            q: self.num_freqs(),
            t_s: self.sampling.t_s,
            f_s: self.sampling.f_s,
            f_carrier: self.f_carrier,
            noise_floor_db: self.noise_floor_db,
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordMetadata {
    format_version: u32,
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "Q")]
    q: usize,
    t_s: f64,
    f_s: f64,
    f_carrier: f64,
    noise_floor_db: Option<f64>,
    label: String,
}

/// Metadata and payload paths for a record stem. Any extension on `path` is
/// replaced.
pub fn record_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

pub fn encode_payload(data: &Array2<Complex64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * BYTES_PER_ENTRY as usize);
    for v in data.iter() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

pub fn write_record(record: &ChannelRecord, path: &Path) -> Result<()> {
    let (meta_path, bin_path) = record_paths(path);
    let payload = encode_payload(&record.data);
    // f64 values outside the f32 range would overflow to infinity
    if let Some(pos) = payload
        .chunks_exact(4)
        .position(|b| !f32::from_le_bytes([b[0], b[1], b[2], b[3]]).is_finite())
    {
        let entry = pos / 2;
        return Err(Error::NonFinite {
            row: entry / record.num_freqs(),
            col: entry % record.num_freqs(),
        });
    }
    let meta = serde_json::to_string_pretty(&record.metadata()).map_err(|e| Error::Metadata {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&bin_path, payload).map_err(|e| Error::io(&bin_path, e))?;
    fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<ChannelRecord> {
    let (meta_path, bin_path) = record_paths(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RecordMetadata = serde_json::from_str(&text).map_err(|e| Error::Metadata {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            found: meta.format_version,
            supported: FORMAT_VERSION,
        });
    }
    if meta.s == 0 || meta.q == 0 {
        return Err(Error::InvalidRecord(format!(
            "empty record ({} x {})",
            meta.s, meta.q
        )));
    }
    let sampling = Sampling::new(meta.t_s, meta.f_s)?;
    if let Some(f) = meta.noise_floor_db {
        if !f.is_finite() {
            return Err(Error::InvalidRecord("noise_floor_db must be finite".into()));
        }
    }

    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let expected = (meta.s as u64)
        .checked_mul(meta.q as u64)
        .and_then(|n| n.checked_mul(BYTES_PER_ENTRY))
        .ok_or_else(|| Error::InvalidRecord("record dimensions overflow".into()))?;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let values: Vec<Complex64> = bytes
        .chunks_exact(8)
        .map(|b| {
            let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let data = Array2::from_shape_vec((meta.s, meta.q), values)
        .map_err(|e| Error::InvalidRecord(e.to_string()))?;

    Ok(ChannelRecord::new(data, sampling)?
        .with_carrier(meta.f_carrier)
        .with_noise_floor_db(meta.noise_floor_db)
        .with_label(meta.label))
}
