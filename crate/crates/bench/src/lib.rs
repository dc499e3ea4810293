//! Benchmark fixtures.

use lsfstat_core::synth::{DelayProfile, DelayShape, DopplerProfile, DopplerShape};
use lsfstat_core::{gen_wssus, ChannelRecord, Sampling, WssusSpec};

pub const T_S: f64 = 129.1e-6;
pub const F_S: f64 = 4.96e6;

pub fn sampling() -> Sampling {
    Sampling::new(T_S, F_S).expect("valid sampling")
}

/// Jakes-Doppler, exponential-PDP channel with `S x Q` samples.
pub fn wssus_record(s: usize, q: usize) -> ChannelRecord {
    let spec = WssusSpec::new(
        DopplerProfile { shape: DopplerShape::Jakes, nu_max: 400.0 },
        DelayProfile { shape: DelayShape::Exponential, tau_rms: 20e-9 },
        6,
    );
    gen_wssus(&spec, (s, q), sampling(), 1).expect("valid fixture")
}
