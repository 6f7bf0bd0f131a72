//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{add_noise, case_by_name, compare_models, SyntheticCase};
use crate::config::AssoConfig;
use crate::error::{AssoError, Result};
use crate::io::{self, write_table};
use crate::pipeline::{separate, ComponentDiagnostics, StopReason};
use crate::signal::SampledSignal;
use crate::stft::{FrequencyGrid, SigmaTrack, StftEngine};
use crate::tuning::select_global_sigma;

#[derive(Debug, Parser)]
#[command(name = "asso", version, about = "Adaptive separation of multicomponent AM-FM signals")]
pub struct Cli {
    /// Seed for every random choice (noise generation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic test signal and its ground truth.
    Synth(SynthArgs),
    /// Adaptive STFT of a signal with a fixed or entropy-selected window.
    Stft(StftArgs),
    /// Separate a signal into trend, components and residual.
    Separate(SeparateArgs),
    /// Compare chirp and sinusoidal recovery under noise.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Signal file: CSV with a `time,value` header, or mono PCM WAV.
    #[arg(long, short)]
    pub input: PathBuf,

    /// Sample rate in Hz; overrides the CSV time column.
    #[arg(long)]
    pub fs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file with `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. `--set gamma1_rel=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<AssoConfig> {
        let mut cfg = match &self.config {
            Some(p) => AssoConfig::from_file(p)?,
            None => AssoConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| AssoError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `lfm` or `three_component`.
    #[arg(long)]
    pub case: String,

    /// Signal CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,

    /// Ground-truth CSV; defaults to `<out stem>_truth.csv`.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Add white Gaussian noise at this SNR in dB.
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StftArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub config: ConfigArgs,

    /// Constant window width in seconds.
    #[arg(long, conflicts_with = "auto", required_unless_present = "auto")]
    pub sigma: Option<f64>,

    /// Select σ(t) by minimum local Rényi entropy.
    #[arg(long)]
    pub auto: bool,

    /// Drop bins above this frequency from the output.
    #[arg(long)]
    pub fmax: Option<f64>,

    /// Directory for tf.csv, sigma.csv and entropy.csv
    #[arg(long, short)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub config: ConfigArgs,

    /// Directory for the separated signals and manifest.json
    #[arg(long, short)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub config: ConfigArgs,

    #[arg(long, default_value = "three_component")]
    pub case: String,

    /// SNR values in dB; `inf` for the clean signal.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 15.0, 20.0])]
    pub snr: Vec<f64>,

    /// Noise realizations per SNR, seeded from `--seed` upwards.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,

    /// Directory for report.csv and summary.csv
    #[arg(long, short)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct InputDescriptor {
    path: String,
    sample_rate: f64,
    samples: usize,
    start_time: f64,
}

#[derive(Debug, Serialize)]
struct StageTimes {
    load_ms: f64,
    separate_ms: f64,
    write_ms: f64,
}

/// Summary written next to the outputs of `separate`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    tool_version: &'static str,
    seed: u64,
    input: InputDescriptor,
    config: AssoConfig,
    component_count: usize,
    stop_reason: StopReason,
    components: Vec<ComponentDiagnostics>,
    outputs: Vec<String>,
    timings: StageTimes,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AssoError::io(dir, e))
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let command = cli.command;
    match cli.threads {
        Some(0) => Err(AssoError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AssoError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(command, seed)),
        None => dispatch(command, seed),
    }
}

fn dispatch(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a, seed),
        Command::Stft(a) => cmd_stft(&a),
        Command::Separate(a) => cmd_separate(&a, seed),
        Command::Bench(a) => cmd_bench(&a, seed),
    }
}

fn write_truth(path: &Path, case: &SyntheticCase) -> Result<()> {
    let times = case.signal.times();
    let truth = case.truth_samples();
    let k = case.truth.len();
    let mut header = vec!["time".to_string()];
    for i in 1..=k {
        header.extend([format!("component_{i}"), format!("if_{i}"), format!("chirp_rate_{i}")]);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = times.iter().enumerate().map(|(n, &t)| {
        let mut row = vec![t];
        for (c, s) in case.truth.iter().zip(&truth) {
            row.extend([s[n], (c.inst_freq)(t), (c.chirp_rate)(t)]);
        }
        row
    });
    write_table(path, &header, rows)
}

pub fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let case = case_by_name(&a.case)?;
    let signal = match a.snr {
        Some(snr) => add_noise(&case.signal, snr, seed)?,
        None => case.signal.clone(),
    };
    io::write_signal_csv(&a.out, &signal.times(), signal.samples())?;
    let truth = a.truth.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("signal");
        a.out.with_file_name(format!("{stem}_truth.csv"))
    });
    write_truth(&truth, &case)?;
    log::info!("wrote {} and {}", a.out.display(), truth.display());
    Ok(())
}

pub fn cmd_stft(a: &StftArgs) -> Result<()> {
    let x = io::read_signal(&a.input.input, a.input.fs)?;
    let cfg = a.config.load()?.resolve(x.sample_rate(), x.len())?;
    create_dir(&a.out_dir)?;
    let (sigma, profile) = match a.sigma {
        Some(s) => (SigmaTrack::constant(s, x.len())?, None),
        None => {
            let grid = FrequencyGrid::one_sided(x.sample_rate(), cfg.fft_len())?;
            let engine = StftEngine::new(grid, x.sample_rate(), cfg.window)?;
            let (track, profile) = select_global_sigma(&x, &cfg.sigma_grid, cfg.zeta, &engine)?;
            (track, Some(profile))
        }
    };
    // grid wide enough for the widest window in use
    let support = 2 * cfg.window.half_len(sigma.max(), x.sample_rate()) + 1;
    let fft_len = (4 * support).next_power_of_two().max(cfg.fft_len());
    let mut grid = FrequencyGrid::one_sided(x.sample_rate(), fft_len)?;
    if let Some(fmax) = a.fmax {
        grid = grid.truncated(fmax)?;
    }
    let tf = StftEngine::new(grid, x.sample_rate(), cfg.window)?.transform(&x, &sigma)?;
    io::write_tf_csv(a.out_dir.join("tf.csv"), &tf)?;
    io::write_sigma_csv(a.out_dir.join("sigma.csv"), &x.times(), sigma.values())?;
    if let Some(p) = profile {
        io::write_entropy_csv(a.out_dir.join("entropy.csv"), &p)?;
    }
    Ok(())
}

pub fn cmd_separate(a: &SeparateArgs, seed: u64) -> Result<()> {
    let t0 = Instant::now();
    let cfg = a.config.load()?;
    let x: SampledSignal = io::read_signal(&a.input.input, a.input.fs)?;
    let load_ms = ms(t0);

    let t1 = Instant::now();
    let result = separate(&x, &cfg)?;
    let separate_ms = ms(t1);

    let t2 = Instant::now();
    let written = io::write_result_bundle(&a.out_dir, &result, &x)?;
    let write_ms = ms(t2);
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed,
        input: InputDescriptor {
            path: a.input.input.display().to_string(),
            sample_rate: x.sample_rate(),
            samples: x.len(),
            start_time: x.start_time(),
        },
        config: result.config_used.clone(),
        component_count: result.components.len(),
        stop_reason: result.diagnostics.stop_reason,
        components: result.diagnostics.components.clone(),
        outputs: written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        timings: StageTimes {
            load_ms,
            separate_ms,
            write_ms,
        },
    };
    let path = a.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| AssoError::io(&path, e))?;
    log::info!(
        "{} components, stopped: {:?}",
        result.components.len(),
        result.diagnostics.stop_reason
    );
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, seed: u64) -> Result<()> {
    if a.snr.is_empty() {
        return Err(AssoError::Usage("--snr needs at least one value".into()));
    }
    let cfg = a.config.load()?;
    let case = case_by_name(&a.case)?;
    let report = compare_models(&case, &cfg, &a.snr, a.seeds, seed)?;
    create_dir(&a.out_dir)?;
    let write = |name: &str, f: &dyn Fn(std::fs::File) -> std::io::Result<()>| {
        let p = a.out_dir.join(name);
        let file = std::fs::File::create(&p).map_err(|e| AssoError::io(&p, e))?;
        f(file).map_err(|e| AssoError::io(&p, e))
    };
    write("report.csv", &|f| report.write_csv(std::io::BufWriter::new(f)))?;
    write("summary.csv", &|f| report.write_summary_csv(std::io::BufWriter::new(f)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["asso", "--seed", "7", "synth", "--case", "lfm", "--out", "x.csv"]).unwrap();
        assert_eq!(cli.seed, 7);
        assert!(matches!(cli.command, Command::Synth(_)));
        let cli = Cli::try_parse_from(["asso", "bench", "--out-dir", "d", "--snr", "10,20", "--threads", "2"]).unwrap();
        assert_eq!(cli.threads, Some(2));
        match cli.command {
            Command::Bench(b) => assert_eq!(b.snr, vec![10.0, 20.0]),
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["asso", "stft", "-i", "x.csv", "-o", "d"]).is_err());
        assert!(Cli::try_parse_from(["asso", "stft", "-i", "x.csv", "-o", "d", "--auto", "--sigma", "1"]).is_err());
    }

    #[test]
    fn bad_override_is_usage_error() {
        let c = ConfigArgs {
            config: None,
            overrides: vec!["gamma1_rel".into()],
        };
        assert!(matches!(c.load(), Err(AssoError::Usage(_))));
        let c = ConfigArgs {
            config: None,
            overrides: vec!["nonsense=1".into()],
        };
        assert!(matches!(c.load(), Err(AssoError::Config(_))));
    }

    #[test]
    fn zero_threads_rejected() {
        let cli = Cli::try_parse_from(["asso", "--threads", "0", "synth", "--case", "lfm", "--out", "x.csv"]).unwrap();
        assert!(matches!(run(cli), Err(AssoError::Usage(_))));
    }
}
