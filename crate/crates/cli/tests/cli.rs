use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lsfstat_core::{read_record, AnalysisConfig, StationarityReport};

fn lsfstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsfstat")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TWO_TONE: &str = r#"{
  "S": 1024, "Q": 16, "t_s": 129.1e-6, "f_s": 4.96e6, "seed": 3,
  "segments": [{"specular": {"paths": [
    {"gain": [1, 0], "delay": 0, "doppler": -400},
    {"gain": [1, 0], "delay": 2e-8, "doppler": 100}]}}]
}"#;

fn scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn noisy_scenario(dir: &Path, s_len: usize, q_len: usize) -> PathBuf {
    scenario(
        dir,
        "noisy.json",
        &format!(
            r#"{{"S": {s_len}, "Q": {q_len}, "t_s": 129.1e-6, "f_s": 4.96e6, "seed": 12, "snr_db": 20,
                "segments": [{{"wssus": {{"doppler": {{"shape": "jakes", "nu_max": 400}},
                                          "delay": {{"shape": "exponential", "tau_rms": 2e-8}},
                                          "num_taps": 4}}}}]}}"#
        ),
    )
}

#[test]
fn synth_writes_record_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "tt.json", TWO_TONE);
    let out = dir.path().join("tt");
    let o = lsfstat(&["synth", s(&sc), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("S = 1024, Q = 16"));
    let rec = read_record(&out).unwrap();
    assert_eq!(rec.data().dim(), (1024, 16));
}

#[test]
fn synth_is_byte_identical_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let sc = noisy_scenario(dir.path(), 200, 8);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(out), "--seed", "77"]).status.code(), Some(0));
    }
    assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(&c), "--seed", "78"]).status.code(), Some(0));
    let bin = |p: &Path| fs::read(p.with_extension("bin")).unwrap();
    assert_eq!(bin(&a), bin(&b));
    assert_eq!(fs::read(a.with_extension("json")).unwrap(), fs::read(b.with_extension("json")).unwrap());
    assert_ne!(bin(&a), bin(&c));
}

#[test]
fn synth_rejects_aliased_doppler() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "alias.json", &TWO_TONE.replace("\"doppler\": 100", "\"doppler\": 5000"));
    let o = lsfstat(&["synth", s(&sc), "-o", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("doppler alias"), "{}", stderr(&o));
}

#[test]
fn synth_unparsable_scenario_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "bad.json", "{\"S\": 10,");
    assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(&dir.path().join("x"))]).status.code(), Some(1));
}

#[test]
fn mask_nlos_and_full_interval() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "tt.json", TWO_TONE);
    let rec = dir.path().join("tt");
    assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(&rec)]).status.code(), Some(0));

    let nlos = dir.path().join("nlos");
    let o = lsfstat(&["mask", s(&rec), "-o", s(&nlos), "--doppler", "(-inf,-258)"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let masked = read_record(&nlos).unwrap();
    assert!(masked.label().contains("doppler mask (-inf, -258) Hz, block 512"));
    // one of two equal-power tones removed
    let original = read_record(&rec).unwrap();
    let ratio = masked.mean_power() / original.mean_power();
    assert!((ratio - 0.5).abs() < 0.01, "{ratio}");

    let full = dir.path().join("full");
    let o = lsfstat(&["mask", s(&rec), "-o", s(&full), "--doppler", "-inf,inf"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let back = read_record(&full).unwrap();
    for (a, b) in back.data().iter().zip(original.data()) {
        assert!((a - b).norm() < 1e-6);
    }

    let o = lsfstat(&["mask", s(&rec), "-o", s(&full), "--doppler", "-5000,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("doppler alias"));
}

#[test]
fn analyze_missing_input_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsfstat(&["analyze", s(&dir.path().join("nothing")), "-o", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_invalid_parameters_are_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let sc = noisy_scenario(dir.path(), 200, 40);
    let rec = dir.path().join("rec");
    assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(&rec)]).status.code(), Some(0));
    let out = dir.path().join("out");
    let o = lsfstat(&["analyze", s(&rec), "-o", s(&out), "--gamma-threshold", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lsfstat(&["analyze", s(&rec), "-o", s(&out), "--m", "80"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn analyze_writes_outputs_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let sc = noisy_scenario(dir.path(), 400, 60);
    let rec = dir.path().join("rec");
    assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(&rec)]).status.code(), Some(0));

    let config_path = dir.path().join("config.json");
    fs::write(&config_path, r#"{"n": 20, "m": 24, "delta_t": 4, "gamma_threshold": 0.85}"#).unwrap();
    let out = dir.path().join("out");
    let o = lsfstat(&[
        "analyze",
        s(&rec),
        "-o",
        s(&out),
        "--config",
        s(&config_path),
        "--delta-t",
        "6",
        "--mask-doppler",
        "-1000,1000",
        "--interval",
        "early=0:0.02",
        "--interval",
        "never=10:11",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in [
        "report.json",
        "collinearity_freq.csv",
        "collinearity_time.csv",
        "extents_freq.csv",
        "extents_time.csv",
        "doppler_profile.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let report: StationarityReport =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let want = AnalysisConfig {
        n: 20,
        m: 24,
        delta_t: 6,
        gamma_threshold: 0.85,
        mask_doppler: Some(lsfstat_core::DopplerInterval::new(-1000.0, 1000.0).unwrap()),
        intervals: vec![
            lsfstat_core::TimeInterval::parse("early=0:0.02").unwrap(),
            lsfstat_core::TimeInterval::parse("never=10:11").unwrap(),
        ],
        ..Default::default()
    };
    assert_eq!(report.config, want);
    assert_eq!(report.frequency_pass.plan.n, 20);
    assert_eq!(report.frequency_pass.plan.delta_t, 6);

    let header = fs::read_to_string(out.join("collinearity_time.csv")).unwrap();
    let k_t = report.time.len();
    assert_eq!(header.lines().count(), k_t + 1);

    let o = lsfstat(&["report", s(&out.join("report.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("early"));
    let never = table.lines().find(|l| l.starts_with("never")).unwrap();
    assert!(never.contains("n/a"), "{never}");
}

#[test]
fn report_rejects_corrupt_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(dir.path(), "report.json", "{\"config\": ");
    assert_eq!(lsfstat(&["report", s(&p)]).status.code(), Some(1));
    assert_eq!(lsfstat(&["report", s(&dir.path().join("missing.json"))]).status.code(), Some(1));
}

#[test]
fn full_scale_run() {
    let dir = tempfile::tempdir().unwrap();
    let sc = noisy_scenario(dir.path(), 5920, 103);
    let rec = dir.path().join("rec");
    assert_eq!(lsfstat(&["synth", s(&sc), "-o", s(&rec)]).status.code(), Some(0));
    assert_eq!(fs::metadata(rec.with_extension("bin")).unwrap().len(), 4_878_080);
    let out = dir.path().join("out");
    let o = lsfstat(&["analyze", s(&rec), "-o", s(&out), "--n", "100", "--m", "55"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("frequency pass: 1165 x 10 LSF grid of 100 x 55 regions"), "{}", stdout(&o));
}
