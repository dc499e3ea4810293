//! Collinearity between local scattering functions and the stationarity
//! regions derived from it.
//!
//! The collinearity of two LSF index sets is the Frobenius inner product of
//! the stacked LSFs normalized by their Frobenius norms. In frequency the
//! stack runs over all time indices; in time it runs over all frequency
//! indices. A region pair where either LSF has zero energy is left out of
//! all three sums.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::channel_io::ChannelRecord;
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::lsf::{
    doppler_mask, doppler_power_profile, estimate_noise_floor, lsf_estimate,
    noise_threshold_inplace, per_bin_noise_db, plan_regions, LsfGrid, RegionPlan,
};
use crate::taper::build_tapers;

pub const DEFAULT_GAMMA_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Time,
    Frequency,
}

/// Pairwise collinearity of LSFs along one domain. Entries involving an
/// index without energy are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CollinearityMatrix {
    values: Array2<f64>,
    domain: Domain,
    gamma_threshold: f64,
    defined: Vec<bool>,
}

impl CollinearityMatrix {
    /// Wraps an externally computed square matrix. Indices whose diagonal
    /// entry is NaN are undefined.
    pub fn from_values(values: Array2<f64>, domain: Domain) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "collinearity matrix must be square, got {:?}",
                values.dim()
            )));
        }
        let defined = values.diag().iter().map(|v| !v.is_nan()).collect();
        Ok(CollinearityMatrix {
            values,
            domain,
            gamma_threshold: DEFAULT_GAMMA_THRESHOLD,
            defined,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn gamma_threshold(&self) -> f64 {
        self.gamma_threshold
    }

    pub fn with_threshold(mut self, gamma_threshold: f64) -> Self {
        self.gamma_threshold = gamma_threshold;
        self
    }

    pub fn len(&self) -> usize {
        self.defined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defined.is_empty()
    }

    pub fn is_defined(&self, i: usize) -> bool {
        self.defined[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[[i, j]];
        (!v.is_nan()).then_some(v)
    }

    /// Indices with zero energy across the whole other domain.
    pub fn undefined_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.defined[i]).collect()
    }
}

pub fn collinearity_freq(grid: &LsfGrid) -> Result<CollinearityMatrix> {
    collinearity(grid, Domain::Frequency)
}

pub fn collinearity_time(grid: &LsfGrid) -> Result<CollinearityMatrix> {
    collinearity(grid, Domain::Time)
}

fn collinearity(grid: &LsfGrid, domain: Domain) -> Result<CollinearityMatrix> {
    let plan = grid.plan();
    let (k_t, k_f) = (plan.k_t_count, plan.k_f_count);
    let flat = grid.flat();
    let (size, other) = match domain {
        Domain::Frequency => (k_f, k_t),
        Domain::Time => (k_t, k_f),
    };
    // rows of `flat` belonging to the `o`-th slice of the other domain
    let slice = |o: usize| -> ArrayView2<f64> {
        match domain {
            Domain::Frequency => flat.slice(s![o * k_f..(o + 1) * k_f, ..]),
            Domain::Time => flat.slice(s![o..;k_f, ..]),
        }
    };

    // energy[o][i]: squared Frobenius norm of the LSF at index i, slice o
    let mut energy = Array2::<f64>::zeros((other, size));
    let mut numerator = Array2::<f64>::zeros((size, size));
    for o in 0..other {
        let b = slice(o);
        for (i, row) in b.rows().into_iter().enumerate() {
            energy[[o, i]] = row.dot(&row);
        }
        numerator += &b.dot(&b.t());
    }

    let defined: Vec<bool> = (0..size)
        .map(|i| energy.column(i).iter().any(|&e| e > 0.0))
        .collect();
    if !defined.iter().any(|&d| d) {
        return Err(Error::ZeroEnergy);
    }

    let mut values = Array2::from_elem((size, size), f64::NAN);
    for i in 0..size {
        if !defined[i] {
            continue;
        }
        values[[i, i]] = 1.0;
        for j in i + 1..size {
            if !defined[j] {
                continue;
            }
            let (mut ei, mut ej) = (0.0, 0.0);
            for o in 0..other {
                let (a, b) = (energy[[o, i]], energy[[o, j]]);
                if a > 0.0 && b > 0.0 {
                    ei += a;
                    ej += b;
                }
            }
            // no slice where both carry energy: nothing in common
            let v = if ei > 0.0 && ej > 0.0 {
                (numerator[[i, j]] / (ei * ej).sqrt()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(CollinearityMatrix {
        values,
        domain,
        gamma_threshold: DEFAULT_GAMMA_THRESHOLD,
        defined,
    })
}

/// Stationarity extent at one index: the maximal contiguous run of indices
/// around it whose collinearity with it exceeds the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub index: usize,
    /// Seconds or Hz; `None` for an index without energy.
    pub extent: Option<f64>,
    pub run_start: usize,
    /// Inclusive.
    pub run_end: usize,
    pub run_length: usize,
    /// The run touches the first or last index, so the true region may
    /// extend beyond the analyzed record.
    pub censored: bool,
}

/// `extent = (region_len + (run_length - 1) * hop) * sample_step`.
pub fn stationarity_extent(
    matrix: &CollinearityMatrix,
    region_len: usize,
    hop: usize,
    sample_step: f64,
) -> Vec<Extent> {
    let k = matrix.len();
    let thr = matrix.gamma_threshold;
    let above = |i: usize, j: usize| matrix.values[[i, j]] > thr;
    (0..k)
        .map(|i| {
            if !matrix.defined[i] {
                return Extent {
                    index: i,
                    extent: None,
                    run_start: i,
                    run_end: i,
                    run_length: 0,
                    censored: false,
                };
            }
            let mut lo = i;
            while lo > 0 && above(i, lo - 1) {
                lo -= 1;
            }
            let mut hi = i;
            while hi + 1 < k && above(i, hi + 1) {
                hi += 1;
            }
            let run_length = hi - lo + 1;
            Extent {
                index: i,
                extent: Some((region_len + (run_length - 1) * hop) as f64 * sample_step),
                run_start: lo,
                run_end: hi,
                run_length,
                censored: lo == 0 || hi + 1 == k,
            }
        })
        .collect()
}

/// Region length in frequency for the time pass: `floor(min f_stat / f_s)`,
/// at most `q`.
pub fn update_m(f_stat: &[Option<f64>], f_s: f64, q: usize) -> Result<usize> {
    if f_stat.is_empty() {
        return Err(Error::InvalidParameter("no stationarity bandwidths".into()));
    }
    let undefined: Vec<usize> = f_stat
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.is_none().then_some(i))
        .collect();
    if !undefined.is_empty() {
        return Err(Error::UndefinedExtent(undefined));
    }
    let min = f_stat.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    // tolerate representation error in the (M + k * hop) * f_s products
    let m = (min / f_s * (1.0 + 1e-12)).floor() as usize;
    Ok(m.clamp(1, q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    #[serde(rename = "S")]
    pub s: usize,
    /// Frequency bins analyzed after any bandwidth restriction.
    #[serde(rename = "Q")]
    pub q: usize,
    pub t_s: f64,
    pub f_s: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassSummary {
    pub plan: RegionPlan,
    /// Per-bin noise floor used for thresholding, dB; `None` when disabled
    /// or when the estimate is zero.
    pub noise_floor_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub start: f64,
    pub end: f64,
    /// Time indices whose region center falls in the interval.
    pub count: usize,
    pub mean_t_stat: Option<f64>,
    pub min_t_stat: Option<f64>,
    pub censored: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UndefinedIndices {
    pub time: Vec<usize>,
    pub frequency: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub config: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub record: RecordSummary,
    pub frequency_pass: PassSummary,
    pub time_pass: PassSummary,
    /// Frequency region length used in the time pass.
    pub m_updated: usize,
    /// Stationarity bandwidth per frequency index (Hz).
    pub frequency: Vec<Extent>,
    /// Stationarity time per time index (s).
    pub time: Vec<Extent>,
    /// Center time (s) of each time-pass region.
    pub time_centers: Vec<f64>,
    pub mean_t_stat: Option<f64>,
    pub min_f_stat: Option<f64>,
    pub intervals: Vec<IntervalSummary>,
    pub undefined_indices: UndefinedIndices,
}

impl StationarityReport {
    pub fn f_stat(&self) -> Vec<Option<f64>> {
        self.frequency.iter().map(|e| e.extent).collect()
    }

    pub fn t_stat(&self) -> Vec<Option<f64>> {
        self.time.iter().map(|e| e.extent).collect()
    }
}

/// Everything produced by [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: StationarityReport,
    pub frequency_collinearity: CollinearityMatrix,
    pub time_collinearity: CollinearityMatrix,
    /// `K_t x N` Doppler power profile of the time-pass grid.
    pub doppler_profile: Array2<f64>,
    pub doppler_axis: Vec<f64>,
}

fn thresholded_grid(
    record: &ChannelRecord,
    plan: &RegionPlan,
    config: &AnalysisConfig,
) -> Result<(LsfGrid, Option<f64>)> {
    let tapers = build_tapers(
        plan.n,
        plan.m,
        config.taper_a_t,
        config.taper_a_f,
        config.tapers_t,
        config.tapers_f,
    )?;
    let mut grid = lsf_estimate(record, plan, &tapers)?;
    let Some(margin) = config.noise_margin_db else {
        return Ok((grid, None));
    };
    let floor = match config.noise_floor_db.or(record.noise_floor_db()) {
        Some(sample_db) => per_bin_noise_db(sample_db, plan.n, plan.m),
        None => estimate_noise_floor(&grid, config.guard_fraction)?,
    };
    noise_threshold_inplace(&mut grid, floor, margin);
    Ok((grid, floor.is_finite().then_some(floor)))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Two-pass stationarity analysis.
///
/// 1. LSFs on the seed plan (`n x m`), noise-thresholded.
/// 2. Frequency collinearity gives the stationarity bandwidth per index.
/// 3. The frequency region grows to the smallest stationarity bandwidth, or
///    to the whole analyzed band when every index is stationary across all
///    frequency indices; `m_override` bypasses this.
/// 4. LSFs on the widened plan; time collinearity gives the stationarity
///    time per index.
pub fn analyze(record: &ChannelRecord, config: &AnalysisConfig) -> Result<Analysis> {
    config.validate()?;
    let mut record = match config.mask_doppler {
        Some(interval) => doppler_mask(record, config.mask_block_len, interval)?,
        None => record.clone(),
    };
    if let Some(b_mhz) = config.bandwidth_mhz {
        let q = ((b_mhz * 1e6 / record.f_s()) * (1.0 + 1e-12)).floor() as usize;
        if q == 0 || q > record.num_freqs() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {b_mhz} MHz selects {q} of {} frequency bins",
                record.num_freqs()
            )));
        }
        let data = record.data().slice(s![.., ..q]).to_owned();
        record = ChannelRecord::new(data, record.sampling())?
            .with_carrier(record.f_carrier())
            .with_noise_floor_db(record.noise_floor_db())
            .with_label(record.label().to_string());
    }
    let (s_len, q_len) = (record.num_times(), record.num_freqs());
    let (t_s, f_s) = (record.t_s(), record.f_s());

    let plan_f = plan_regions((s_len, q_len), config.n, config.m, config.delta_t, config.delta_f)?;
    let (grid_f, floor_f) = thresholded_grid(&record, &plan_f, config)?;
    let coll_f = collinearity_freq(&grid_f)?.with_threshold(config.gamma_threshold);
    drop(grid_f);
    let freq_ext = stationarity_extent(&coll_f, plan_f.m, plan_f.delta_f, f_s);

    let m_updated = match config.m_override {
        Some(m) => m.min(q_len),
        None => {
            let full = freq_ext
                .iter()
                .all(|e| e.extent.is_some() && e.run_start == 0 && e.run_end + 1 == plan_f.k_f_count);
            if full {
                q_len
            } else {
                let f_stat: Vec<Option<f64>> = freq_ext.iter().map(|e| e.extent).collect();
                update_m(&f_stat, f_s, q_len)?
            }
        }
    };

    let plan_t = plan_regions((s_len, q_len), config.n, m_updated, config.delta_t, config.delta_f)?;
    let (grid_t, floor_t) = thresholded_grid(&record, &plan_t, config)?;
    let coll_t = collinearity_time(&grid_t)?.with_threshold(config.gamma_threshold);
    let time_ext = stationarity_extent(&coll_t, plan_t.n, plan_t.delta_t, t_s);
    let doppler_profile = doppler_power_profile(&grid_t);
    let doppler_axis = grid_t.doppler_axis().to_vec();
    drop(grid_t);

    let time_centers: Vec<f64> = (0..plan_t.k_t_count)
        .map(|k| (plan_t.time_start(k) as f64 + plan_t.n as f64 / 2.0) * t_s)
        .collect();
    let intervals = config
        .intervals
        .iter()
        .map(|iv| {
            let members: Vec<&Extent> = time_ext
                .iter()
                .zip(&time_centers)
                .filter(|(_, &c)| iv.contains(c))
                .map(|(e, _)| e)
                .collect();
            IntervalSummary {
                name: iv.name.clone(),
                start: iv.start,
                end: iv.end,
                count: members.len(),
                mean_t_stat: mean(members.iter().filter_map(|e| e.extent)),
                min_t_stat: members.iter().filter_map(|e| e.extent).reduce(f64::min),
                censored: members.iter().filter(|e| e.censored).count(),
            }
        })
        .collect();

    let report = StationarityReport {
        config: config.clone(),
        input: None,
        record: RecordSummary {
            s: s_len,
            q: q_len,
            t_s,
            f_s,
            label: record.label().to_string(),
        },
        frequency_pass: PassSummary {
            plan: plan_f,
            noise_floor_db: floor_f,
        },
        time_pass: PassSummary {
            plan: plan_t,
            noise_floor_db: floor_t,
        },
        m_updated,
        mean_t_stat: mean(time_ext.iter().filter_map(|e| e.extent)),
        min_f_stat: freq_ext.iter().filter_map(|e| e.extent).reduce(f64::min),
        frequency: freq_ext,
        time: time_ext,
        time_centers,
        intervals,
        undefined_indices: UndefinedIndices {
            time: coll_t.undefined_indices(),
            frequency: coll_f.undefined_indices(),
        },
    };
    Ok(Analysis {
        report,
        frequency_collinearity: coll_f,
        time_collinearity: coll_t,
        doppler_profile,
        doppler_axis,
    })
}
