//! Command implementations behind the `lsfstat` binary.
//!
//! Exit codes: 0 success, 1 I/O or unreadable input, 2 validation or
//! domain error.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lsfstat_core::export::{write_collinearity_csv, write_doppler_profile_csv, write_extents_csv};
use lsfstat_core::{
    analyze, doppler_mask, read_record, write_record, AnalysisConfig, DopplerInterval, Scenario,
    StationarityReport, TimeInterval,
};

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn io(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<lsfstat_core::Error> for CliError {
    fn from(e: lsfstat_core::Error) -> Self {
        CliError {
            code: if e.is_io() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

/// Syntax errors mean the file is unreadable (1); well-formed JSON with bad
/// contents is a validation error (2).
fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if e.is_data() {
            CliError::invalid(msg)
        } else {
            CliError::io(msg)
        }
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))
}

fn write_io(path: &Path, r: std::io::Result<()>) -> CliResult<()> {
    r.map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "lsfstat", version, about = "Time-frequency stationarity regions of vehicular radio channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic channel record from a scenario file.
    Synth {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Keep only Doppler shifts inside an open interval, e.g. "(-inf,-258)".
    Mask {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        doppler: String,
        #[arg(long, default_value_t = lsfstat_core::lsf::DEFAULT_MASK_BLOCK_LEN)]
        block_len: usize,
    },
    /// Two-pass stationarity analysis; writes report.json and CSV tables.
    Analyze(Box<AnalyzeArgs>),
    /// Print a summary table of a report.
    Report { report: PathBuf },
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub out_dir: PathBuf,
    /// JSON analysis config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub delta_t: Option<usize>,
    #[arg(long)]
    pub delta_f: Option<usize>,
    #[arg(long)]
    pub taper_a_t: Option<f64>,
    #[arg(long)]
    pub taper_a_f: Option<f64>,
    #[arg(long)]
    pub tapers_t: Option<usize>,
    #[arg(long)]
    pub tapers_f: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub noise_margin_db: Option<f64>,
    /// Skip noise thresholding.
    #[arg(long, conflicts_with = "noise_margin_db")]
    pub no_threshold: bool,
    /// Per-sample noise power in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_floor_db: Option<f64>,
    #[arg(long)]
    pub guard_fraction: Option<f64>,
    #[arg(long)]
    pub bandwidth_mhz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mask_doppler: Option<String>,
    #[arg(long)]
    pub mask_block_len: Option<usize>,
    #[arg(long)]
    pub gamma_threshold: Option<f64>,
    #[arg(long)]
    pub m_override: Option<usize>,
    /// Summary interval `name=start:end` in seconds; repeatable.
    #[arg(long = "interval")]
    pub intervals: Vec<String>,
}

impl AnalyzeArgs {
    pub fn resolve_config(&self) -> CliResult<AnalysisConfig> {
        let mut c = match &self.config {
            Some(path) => parse_json(&read_text(path)?, path)?,
            None => AnalysisConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(n, m, delta_t, delta_f, taper_a_t, taper_a_f, tapers_t, tapers_f, guard_fraction, mask_block_len, gamma_threshold);
        if self.no_threshold {
            c.noise_margin_db = None;
        } else if self.noise_margin_db.is_some() {
            c.noise_margin_db = self.noise_margin_db;
        }
        if self.noise_floor_db.is_some() {
            c.noise_floor_db = self.noise_floor_db;
        }
        if self.bandwidth_mhz.is_some() {
            c.bandwidth_mhz = self.bandwidth_mhz;
        }
        if self.m_override.is_some() {
            c.m_override = self.m_override;
        }
        if let Some(text) = &self.mask_doppler {
            c.mask_doppler = Some(DopplerInterval::parse(text)?);
        }
        if !self.intervals.is_empty() {
            c.intervals = self
                .intervals
                .iter()
                .map(|s| TimeInterval::parse(s))
                .collect::<Result<_, _>>()?;
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { scenario, out, seed } => cmd_synth(&scenario, &out, seed),
        Command::Mask { input, out, doppler, block_len } => {
            cmd_mask(&input, &out, &DopplerInterval::parse(&doppler)?, block_len)
        }
        Command::Analyze(args) => {
            let config = args.resolve_config()?;
            let report = cmd_analyze(&args.input, &args.out_dir, &config)?;
            let plan = &report.frequency_pass.plan;
            println!(
                "frequency pass: {} x {} LSF grid of {} x {} regions",
                plan.k_t_count, plan.k_f_count, plan.n, plan.m
            );
            let plan = &report.time_pass.plan;
            println!(
                "time pass:      {} x {} LSF grid of {} x {} regions",
                plan.k_t_count, plan.k_f_count, plan.n, plan.m
            );
            println!("wrote {}", args.out_dir.join("report.json").display());
            Ok(())
        }
        Command::Report { report } => {
            print!("{}", cmd_report(&report)?);
            Ok(())
        }
    }
}

pub fn cmd_synth(scenario_path: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let mut scenario: Scenario = parse_json(&read_text(scenario_path)?, scenario_path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let rec = scenario.generate()?;
    write_record(&rec, out)?;
    println!(
        "{}: S = {}, Q = {}, t_s = {} s, f_s = {} Hz ({:.6} s, {:.3} MHz)",
        out.display(),
        rec.num_times(),
        rec.num_freqs(),
        rec.t_s(),
        rec.f_s(),
        rec.duration(),
        rec.bandwidth() / 1e6
    );
    Ok(())
}

pub fn cmd_mask(input: &Path, out: &Path, interval: &DopplerInterval, block_len: usize) -> CliResult<()> {
    let rec = read_record(input)?;
    let masked = doppler_mask(&rec, block_len, *interval)?;
    write_record(&masked, out)?;
    println!("{}: kept Doppler {interval} Hz", out.display());
    Ok(())
}

type Emit<'a> = &'a dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>;

/// Runs the analysis and writes `report.json`, `collinearity_freq.csv`,
/// `collinearity_time.csv`, `extents_freq.csv`, `extents_time.csv` and
/// `doppler_profile.csv` into `out_dir`.
pub fn cmd_analyze(input: &Path, out_dir: &Path, config: &AnalysisConfig) -> CliResult<StationarityReport> {
    let record = read_record(input)?;
    let mut analysis = analyze(&record, config)?;
    analysis.report.input = Some(input.display().to_string());

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", out_dir.display())))?;
    let report_path = out_dir.join("report.json");
    let mut w = create(&report_path)?;
    let text = serde_json::to_string_pretty(&analysis.report).expect("report serializes");
    write_io(&report_path, writeln!(w, "{text}").and_then(|_| w.flush()))?;

    let tables: [(&str, Emit); 5] = [
        ("collinearity_freq.csv", &|w| write_collinearity_csv(&analysis.frequency_collinearity, w)),
        ("collinearity_time.csv", &|w| write_collinearity_csv(&analysis.time_collinearity, w)),
        ("extents_freq.csv", &|w| write_extents_csv(&analysis.report.frequency, w)),
        ("extents_time.csv", &|w| write_extents_csv(&analysis.report.time, w)),
        ("doppler_profile.csv", &|w| {
            write_doppler_profile_csv(&analysis.doppler_profile, &analysis.doppler_axis, w)
        }),
    ];
    for (name, emit) in tables {
        let path = out_dir.join(name);
        let mut w = create(&path)?;
        write_io(&path, emit(&mut w).and_then(|_| w.flush()))?;
    }
    Ok(analysis.report)
}

fn ms(v: Option<f64>) -> String {
    v.map(|x| format!("{:.3}", x * 1e3)).unwrap_or_else(|| "n/a".into())
}

/// Human-readable summary of a saved report.
pub fn cmd_report(path: &Path) -> CliResult<String> {
    let text = read_text(path)?;
    let r: StationarityReport = serde_json::from_str(&text)
        .map_err(|e| CliError::io(format!("{}: not a report: {e}", path.display())))?;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("input:      {}", r.input.as_deref().unwrap_or("n/a")));
    line(format!(
        "record:     S = {}, Q = {}, t_s = {} s, f_s = {} Hz",
        r.record.s, r.record.q, r.record.t_s, r.record.f_s
    ));
    for (name, pass) in [("frequency", &r.frequency_pass), ("time", &r.time_pass)] {
        let p = &pass.plan;
        line(format!(
            "{name:<10}  {} x {} regions of {} x {}, noise floor {}",
            p.k_t_count,
            p.k_f_count,
            p.n,
            p.m,
            pass.noise_floor_db.map(|v| format!("{v:.2} dB/bin")).unwrap_or_else(|| "n/a".into())
        ));
    }
    let censored_f = r.frequency.iter().filter(|e| e.censored).count();
    line(format!(
        "bandwidth:  min {} MHz ({censored_f} of {} censored); time-pass M = {}",
        r.min_f_stat.map(|v| format!("{:.3}", v / 1e6)).unwrap_or_else(|| "n/a".into()),
        r.frequency.len(),
        r.m_updated
    ));
    line(String::new());
    line(format!(
        "{:<12} {:>10} {:>10} {:>7} {:>14} {:>13} {:>9}",
        "interval", "start s", "end s", "count", "mean t_stat ms", "min t_stat ms", "censored"
    ));
    let all_censored = r.time.iter().filter(|e| e.censored).count();
    let all_min = r.time.iter().filter_map(|e| e.extent).reduce(f64::min);
    let end = r.record.s as f64 * r.record.t_s;
    line(format!(
        "{:<12} {:>10.4} {:>10.4} {:>7} {:>14} {:>13} {:>9}",
        "all",
        0.0,
        end,
        r.time.len(),
        ms(r.mean_t_stat),
        ms(all_min),
        all_censored
    ));
    for (i, iv) in r.intervals.iter().enumerate() {
        let name = if iv.name.is_empty() { format!("#{}", i + 1) } else { iv.name.clone() };
        line(format!(
            "{:<12} {:>10.4} {:>10.4} {:>7} {:>14} {:>13} {:>9}",
            name,
            iv.start,
            iv.end,
            iv.count,
            ms(iv.mean_t_stat),
            ms(iv.min_t_stat),
            iv.censored
        ));
    }
    Ok(out)
}
