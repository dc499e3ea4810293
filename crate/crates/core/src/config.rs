use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsf::{DopplerInterval, DEFAULT_GUARD_FRACTION, DEFAULT_MASK_BLOCK_LEN, DEFAULT_NOISE_MARGIN_DB};
use crate::stationarity::DEFAULT_GAMMA_THRESHOLD;
use crate::taper::{DEFAULT_A_FREQ, DEFAULT_A_TIME, DEFAULT_TAPERS};

/// Half-open time window `[start, end)` in seconds for summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    /// Parses `start:end` or `name=start:end`, in seconds.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, span) = match text.split_once('=') {
            Some((n, s)) => (n.trim().to_string(), s),
            None => (String::new(), text),
        };
        let (a, b) = span
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("interval must be 'start:end', got '{text}'")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad interval bound '{s}'")))
        };
        let iv = TimeInterval {
            name,
            start: parse(a)?,
            end: parse(b)?,
        };
        iv.validate()?;
        Ok(iv)
    }

    fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(Error::InvalidParameter(format!(
                "interval [{}, {}) is empty or non-finite",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Every knob of the two-pass stationarity analysis. Defaults reproduce the
/// seed region `N = M = 30`, hops of 5 samples, two DPSS tapers per
/// dimension with `a_t = 2`, `a_f = 2.5`, a 10 dB noise margin and a
/// collinearity threshold of 0.9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub n: usize,
    pub m: usize,
    pub delta_t: usize,
    pub delta_f: usize,
    pub taper_a_t: f64,
    pub taper_a_f: f64,
    pub tapers_t: usize,
    pub tapers_f: usize,
    /// Margin above the noise floor in dB; `None` disables thresholding.
    pub noise_margin_db: Option<f64>,
    /// Per-sample noise power in dB. Falls back to the record metadata, then
    /// to an estimate from the LSF grid.
    pub noise_floor_db: Option<f64>,
    pub guard_fraction: f64,
    /// Analyze only the first `floor(B / f_s)` frequency bins.
    pub bandwidth_mhz: Option<f64>,
    pub mask_doppler: Option<DopplerInterval>,
    pub mask_block_len: usize,
    pub gamma_threshold: f64,
    /// Region length in frequency for the time pass, bypassing the update.
    pub m_override: Option<usize>,
    pub intervals: Vec<TimeInterval>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            n: 30,
            m: 30,
            delta_t: 5,
            delta_f: 5,
            taper_a_t: DEFAULT_A_TIME,
            taper_a_f: DEFAULT_A_FREQ,
            tapers_t: DEFAULT_TAPERS,
            tapers_f: DEFAULT_TAPERS,
            noise_margin_db: Some(DEFAULT_NOISE_MARGIN_DB),
            noise_floor_db: None,
            guard_fraction: DEFAULT_GUARD_FRACTION,
            bandwidth_mhz: None,
            mask_doppler: None,
            mask_block_len: DEFAULT_MASK_BLOCK_LEN,
            gamma_threshold: DEFAULT_GAMMA_THRESHOLD,
            m_override: None,
            intervals: Vec::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n < 2 || self.m < 2 {
            return bad(format!("region must be at least 2 x 2, got {} x {}", self.n, self.m));
        }
        if self.delta_t == 0 || self.delta_f == 0 {
            return bad("hops must be >= 1".into());
        }
        if self.tapers_t == 0 || self.tapers_f == 0 {
            return bad("taper counts must be >= 1".into());
        }
        for (name, a, len) in [("taper_a_t", self.taper_a_t, self.n), ("taper_a_f", self.taper_a_f, self.m)] {
            if !(a > 0.0 && a < len as f64 / 2.0) {
                return bad(format!("{name} = {a} must be in (0, {})", len as f64 / 2.0));
            }
        }
        if let Some(margin) = self.noise_margin_db {
            if margin.is_nan() {
                return bad("noise margin is NaN".into());
            }
        }
        if let Some(floor) = self.noise_floor_db {
            if !floor.is_finite() {
                return bad("noise floor must be finite".into());
            }
        }
        if !(self.guard_fraction > 0.0 && self.guard_fraction <= 1.0) {
            return bad(format!("guard_fraction {} must be in (0, 1]", self.guard_fraction));
        }
        if let Some(b) = self.bandwidth_mhz {
            if !(b.is_finite() && b > 0.0) {
                return bad(format!("bandwidth {b} MHz must be positive"));
            }
        }
        if self.mask_block_len == 0 {
            return bad("mask block length must be >= 1".into());
        }
        if !(self.gamma_threshold.is_finite() && (0.0..1.0).contains(&self.gamma_threshold)) {
            return bad(format!("gamma threshold {} must be in [0, 1)", self.gamma_threshold));
        }
        if self.m_override == Some(0) {
            return bad("m_override must be >= 1".into());
        }
        for iv in &self.intervals {
            iv.validate()?;
        }
        Ok(())
    }
}
