mod common;

use common::*;
use lsfstat_core::lsf::per_bin_noise_db;
use lsfstat_core::taper::build_tapers;
use lsfstat_core::*;
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn one_region(h: Array2<Complex64>) -> (ChannelRecord, RegionPlan) {
    let (n, m) = h.dim();
    let plan = plan_regions((n, m), n, m, 1, 1).unwrap();
    (ChannelRecord::new(h, sampling()).unwrap(), plan)
}

fn tone(nu: f64, tau: f64) -> SpecularPath {
    SpecularPath::fixed(Complex64::new(1.0, 0.0), tau, nu)
}

#[test]
fn matches_dsft_oracle_on_multiple_regions() {
    let h = random_complex(1, (40, 30));
    let rec = ChannelRecord::new(h, sampling()).unwrap();
    let plan = plan_regions((40, 30), 12, 10, 7, 6).unwrap();
    let tapers = build_tapers(12, 10, 2.0, 2.0, 2, 2).unwrap();
    let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
    for k_t in 0..plan.k_t_count {
        for k_f in 0..plan.k_f_count {
            let (t0, f0) = (plan.time_start(k_t), plan.freq_start(k_f));
            let region = rec.data().slice(ndarray::s![t0..t0 + 12, f0..f0 + 10]).to_owned();
            let oracle = dsft_oracle(&region, tapers.windows());
            let peak = oracle.iter().cloned().fold(0.0, f64::max);
            for (x, y) in grid.region(k_t, k_f).iter().zip(oracle.iter()) {
                assert!((x - y).abs() <= 1e-10 * peak);
            }
        }
    }
}

#[test]
fn specular_path_peaks_at_nearest_bins() {
    // a single taper per dimension has a unimodal spectral window, so the
    // peak lands on the bin nearest the path
    let (n, m) = (64, 64);
    let rec = gen_specular(&[tone(100.0, 40e-9)], (n, m), sampling(), None).unwrap();
    let plan = plan_regions((n, m), n, m, 1, 1).unwrap();
    let nearest = |axis: &[f64], x: f64| {
        (0..axis.len())
            .min_by(|&a, &b| (axis[a] - x).abs().total_cmp(&(axis[b] - x).abs()))
            .unwrap()
    };
    let tapers = build_tapers(n, m, 2.0, 2.5, 1, 1).unwrap();
    let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
    let (p, l) = argmax2(&grid.region(0, 0).to_owned());
    assert_eq!(p, nearest(grid.doppler_axis(), 100.0));
    assert_eq!(l, nearest(grid.delay_axis(), 40e-9));
    assert_eq!((p, l), argmax2(&dsft_oracle(rec.data(), tapers.windows())));

    // with two tapers the peak stays within one bin and agrees with the oracle
    let tapers = build_tapers(n, m, 2.0, 2.5, 2, 2).unwrap();
    let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
    let (p2, l2) = argmax2(&grid.region(0, 0).to_owned());
    assert!(p2.abs_diff(p) <= 1 && l2.abs_diff(l) <= 1);
    assert_eq!((p2, l2), argmax2(&dsft_oracle(rec.data(), tapers.windows())));
}

#[test]
fn delay_shift_moves_argmax_by_one_bin() {
    let (n, m) = (32, 40);
    let step = 1.0 / (m as f64 * F_S);
    let plan = plan_regions((n, m), n, m, 1, 1).unwrap();
    let tapers = build_tapers(n, m, 2.0, 2.5, 2, 2).unwrap();
    for start_bin in [0usize, 5, 38] {
        let peak = |bin: usize| {
            let rec = gen_specular(&[tone(0.0, bin as f64 * step)], (n, m), sampling(), None).unwrap();
            argmax2(&lsf_estimate(&rec, &plan, &tapers).unwrap().region(0, 0).to_owned())
        };
        let (p0, l0) = peak(start_bin);
        let (p1, l1) = peak(start_bin + 1);
        assert_eq!(p0, p1);
        assert_eq!(l1, (l0 + 1) % m);
    }
}

#[test]
fn single_tone_profile_peaks_at_tone() {
    let nu = 3.0 / (30.0 * T_S);
    let rec = gen_specular(&[tone(nu, 0.0)], (200, 40), sampling(), None).unwrap();
    let plan = plan_regions((200, 40), 30, 30, 5, 5).unwrap();
    let tapers = build_tapers(30, 30, 2.0, 2.5, 2, 2).unwrap();
    let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
    let profile = doppler_power_profile(&grid);
    let axis = grid.doppler_axis();
    for row in profile.rows() {
        let p = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert!((axis[p] - nu).abs() < 1e-9);
    }
    let delay = delay_power_profile(&grid);
    assert_eq!(delay.dim(), (plan.k_f_count, 30));
}

#[test]
fn parallel_evaluation_is_bitwise_deterministic() {
    let rec = ChannelRecord::new(random_complex(7, (300, 60)), sampling()).unwrap();
    let plan = plan_regions((300, 60), 30, 30, 5, 5).unwrap();
    let tapers = build_tapers(30, 30, 2.0, 2.5, 2, 2).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| lsf_estimate(&rec, &plan, &tapers).unwrap())
    };
    assert_eq!(run(1).flat(), run(4).flat());
}

#[test]
fn threshold_keeps_tone_and_removes_noise() {
    // unit-power tone, noise 30 dB below it
    let (n, m) = (30, 30);
    let clean = gen_specular(&[tone(0.0, 0.0)], (400, 60), sampling(), None).unwrap();
    let rec = add_noise(&clean, 30.0, 99).unwrap();
    let plan = plan_regions((400, 60), n, m, 5, 5).unwrap();
    let tapers = build_tapers(n, m, 2.0, 2.5, 2, 2).unwrap();
    let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
    let clean_grid = lsf_estimate(&clean, &plan, &tapers).unwrap();
    let floor = per_bin_noise_db(rec.noise_floor_db().unwrap(), n, m);
    let out = noise_threshold(&grid, floor, 10.0);

    // noise-only bins: tone leakage at least 10 dB below the noise level
    let leakage_limit = 10f64.powf((floor - 10.0) / 10.0);
    let (mut noise_bins, mut zeroed) = (0usize, 0usize);
    for k_t in 0..plan.k_t_count {
        for k_f in 0..plan.k_f_count {
            let c = out.region(k_t, k_f);
            assert!(c[[n / 2, 0]] > 0.0, "tone bin removed");
            for (v, leak) in c.iter().zip(clean_grid.region(k_t, k_f).iter()) {
                if *leak < leakage_limit {
                    noise_bins += 1;
                    zeroed += (*v == 0.0) as usize;
                }
            }
        }
    }
    assert!(zeroed as f64 >= 0.99 * noise_bins as f64, "{zeroed} of {noise_bins}");
}

#[test]
fn noise_floor_estimates() {
    let (n, m) = (30, 30);
    let plan = plan_regions((300, 60), n, m, 5, 5).unwrap();
    let tapers = build_tapers(n, m, 2.0, 2.5, 2, 2).unwrap();

    // pure noise of unit per-sample power: a noisy unit tone minus the tone
    let silent = ChannelRecord::new(Array2::zeros((300, 60)), sampling()).unwrap();
    let clean = gen_specular(&[tone(0.0, 0.0)], (300, 60), sampling(), None).unwrap();
    let noise = add_noise(&clean, 0.0, 5).unwrap();
    let noise_only = ChannelRecord::new(noise.data() - clean.data(), sampling()).unwrap();
    let grid = lsf_estimate(&noise_only, &plan, &tapers).unwrap();
    let est = estimate_noise_floor(&grid, 0.25).unwrap();
    assert!((est - per_bin_noise_db(0.0, n, m)).abs() < 1.0, "{est}");

    // tone plus known noise
    let grid = lsf_estimate(&noise, &plan, &tapers).unwrap();
    let est = estimate_noise_floor(&grid, 0.25).unwrap();
    let truth = per_bin_noise_db(noise.noise_floor_db().unwrap(), n, m);
    assert!((est - truth).abs() < 1.0, "{est} vs {truth}");

    let grid = lsf_estimate(&silent, &plan, &tapers).unwrap();
    assert_eq!(estimate_noise_floor(&grid, 0.25).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn noiseless_tone_floor_is_negligible() {
    let (n, m) = (30, 30);
    let rec = gen_specular(&[tone(0.0, 0.0)], (300, 60), sampling(), None).unwrap();
    let plan = plan_regions((300, 60), n, m, 5, 5).unwrap();
    let tapers = build_tapers(n, m, 2.0, 2.5, 2, 2).unwrap();
    let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
    let peak = grid.flat().iter().cloned().fold(0.0, f64::max);
    let est = estimate_noise_floor(&grid, 0.25).unwrap();
    assert!(est < linear_to_db(peak) - 60.0, "{est} dB vs peak {}", linear_to_db(peak));
}

fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[test]
fn flat_doppler_marginal_spread() {
    let nu_max = 400.0;
    for n in [64usize, 256, 1024] {
        let plan = plan_regions((n, 4), n, 4, 1, 1).unwrap();
        let axis = lsfstat_core::lsf::doppler_axis(n, T_S);
        let c = Array2::from_shape_fn((n, 4), |(p, _)| if axis[p].abs() <= nu_max { 1.0 } else { 0.0 });
        let grid = LsfGrid::from_regions(&[c], plan, sampling(), 1).unwrap();
        let got = rms_spreads(&grid)[0].unwrap().nu_rms;
        // brute-force discrete second moment
        let support: Vec<f64> = axis.iter().copied().filter(|x| x.abs() <= nu_max).collect();
        let mean = support.iter().sum::<f64>() / support.len() as f64;
        let var = support.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / support.len() as f64;
        assert!((got - var.sqrt()).abs() < 1e-9 * var.sqrt());
        if n == 1024 {
            let limit = nu_max / 3f64.sqrt();
            assert!((got - limit).abs() < 0.01 * limit, "{got} vs {limit}");
        }
    }
}

#[test]
fn two_deltas_in_delay() {
    let (n, m) = (8, 16);
    let plan = plan_regions((n, m), n, m, 1, 1).unwrap();
    let mut c = Array2::zeros((n, m));
    c[[n / 2, 0]] = 1.0;
    c[[n / 2, 6]] = 1.0;
    let grid = LsfGrid::from_regions(&[c], plan, sampling(), 1).unwrap();
    let spread = rms_spreads(&grid)[0].unwrap();
    let d = 6.0 / (m as f64 * F_S);
    assert!((spread.tau_rms - d / 2.0).abs() < 1e-20);
    assert_eq!(spread.nu_rms, 0.0);
}

#[test]
fn mask_full_interval_round_trips() {
    let rec = ChannelRecord::new(random_complex(3, (1300, 8)), sampling()).unwrap();
    let out = doppler_mask(&rec, 512, DopplerInterval::full()).unwrap();
    let err: f64 = rec.data().iter().zip(out.data()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let total: f64 = rec.data().iter().map(|a| a.norm_sqr()).sum();
    assert!((err / total).sqrt() < 1e-9);
    assert!(out.label().contains("doppler mask"));
}

#[test]
fn mask_suppresses_positive_tone() {
    let rec = gen_specular(&[tone(-400.0, 0.0), tone(100.0, 30e-9)], (2048, 8), sampling(), None).unwrap();
    let nlos = DopplerInterval::parse("(-inf,-258)").unwrap();
    for block in [512, 1024] {
        let out = doppler_mask(&rec, block, nlos).unwrap();
        let residual = tone_power(out.data(), 100.0, T_S) / tone_power(rec.data(), 100.0, T_S);
        assert!(10.0 * residual.log10() <= -40.0, "block {block}: {}", 10.0 * residual.log10());
        let kept = tone_power(out.data(), -400.0, T_S) / tone_power(rec.data(), -400.0, T_S);
        assert!((10.0 * kept.log10()).abs() < 0.5);
    }
}

#[test]
fn mask_removes_static_channel() {
    let rec = gen_specular(&[tone(0.0, 10e-9)], (2048, 8), sampling(), None).unwrap();
    let out = doppler_mask(&rec, 512, DopplerInterval::parse("(-inf,-258)").unwrap()).unwrap();
    let ratio = out.mean_power() / rec.mean_power();
    assert!(10.0 * ratio.log10() <= -40.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimate_is_nonnegative_and_satisfies_parseval(n in 5usize..20, m in 5usize..20, seed in any::<u64>()) {
        let (rec, plan) = one_region(random_complex(seed, (n, m)));
        let tapers = build_tapers(n, m, 2.0, 2.0, 2, 2).unwrap();
        let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
        prop_assert!(grid.flat().iter().all(|v| v.is_finite() && *v >= 0.0));
        let tapered: f64 = tapers
            .windows()
            .iter()
            .map(|g| rec.data().iter().zip(g.iter()).map(|(h, w)| (h * w).norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / tapers.len() as f64;
        let total = grid.region(0, 0).sum();
        prop_assert!((total - tapered).abs() <= 1e-9 * tapered);
    }

    #[test]
    fn threshold_is_monotone(margin_a in -20.0f64..20.0, margin_b in -20.0f64..20.0, seed in 0u64..100) {
        let (rec, plan) = one_region(random_complex(seed, (16, 16)));
        let tapers = build_tapers(16, 16, 2.0, 2.0, 1, 1).unwrap();
        let grid = lsf_estimate(&rec, &plan, &tapers).unwrap();
        let (lo, hi) = if margin_a < margin_b { (margin_a, margin_b) } else { (margin_b, margin_a) };
        let a = noise_threshold(&grid, -30.0, lo);
        let b = noise_threshold(&grid, -30.0, hi);
        for ((x, y), orig) in a.flat().iter().zip(b.flat().iter()).zip(grid.flat().iter()) {
            prop_assert!(*x == 0.0 || x == orig);
            prop_assert!(*y == 0.0 || *x != 0.0);
        }
    }
}
