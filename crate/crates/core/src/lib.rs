//! Local scattering function (LSF) estimation and time-frequency
//! stationarity analysis for non-WSSUS wireless channels.
//!
//! The pipeline: a sampled transfer function ([`ChannelRecord`]) is split
//! into overlapping regions, each region gets a multitaper DPSS estimate of
//! its delay-Doppler power ([`LsfGrid`]), and collinearity between LSFs in
//! time and in frequency ([`CollinearityMatrix`]) yields the stationarity
//! time and bandwidth at every index ([`StationarityReport`]).

pub mod channel_io;
pub mod config;
pub mod error;
pub mod export;
pub mod lsf;
pub mod stationarity;
pub mod synth;
pub mod taper;

pub use channel_io::{read_record, write_record, ChannelRecord, Sampling};
pub use config::{AnalysisConfig, TimeInterval};
pub use error::{Error, Result};
pub use lsf::{
    coherence_bounds, delay_power_profile, doppler_mask, doppler_power_profile,
    estimate_noise_floor, lsf_estimate, noise_threshold, plan_regions, rms_spreads,
    CoherenceBounds, DopplerInterval, LsfGrid, RegionPlan, RegionSpread,
};
pub use stationarity::{
    analyze, collinearity_freq, collinearity_time, stationarity_extent, update_m, Analysis,
    CollinearityMatrix, Domain, Extent, StationarityReport,
};
pub use synth::{
    add_noise, gen_piecewise, gen_specular, gen_wssus, Scenario, Segment, SegmentContent,
    SpecularPath, SpecularSet, Trajectory, WssusSpec,
};
pub use taper::{dpss, taper_grid, DpssSet, TaperGrid};
