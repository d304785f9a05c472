//! Command-line front end: decompose a CSV series, generate synthetic
//! signals and run Monte-Carlo experiments.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rfsa::rfsa::{decompose, reconstruct, DecompositionReport, ModeSelect, RfsaConfig};
use rfsa::signal::{generate, round_time, sample_times, snr_to_sigma, SamplingPattern, SignalSpec};
use rfsa::{run_mc, McExperiment, McReport, PenaltyRule, TimeSeries};

pub const DECOMPOSE_SCHEMA: &str = "rfsa.decompose/1";
pub const GENERATE_SCHEMA: &str = "rfsa.generate/1";
pub const BENCH_SCHEMA: &str = "rfsa.bench/1";

/// Rows with more failed trials than this make `bench` exit non-zero.
pub const MAX_FAILED_FRACTION: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "rfsa", version, about = "Sparse sinusoid decomposition of irregularly sampled series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a "t,w" CSV into sinusoids.
    Decompose(DecomposeArgs),
    /// Write a synthetic signal as a "t,w" CSV.
    Generate(GenerateArgs),
    /// Run a Monte-Carlo experiment.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for report.json and reconstruction.csv.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub rfsa: RfsaOverrides,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; the resolved configuration goes next to it as <stem>.spec.json.
    #[arg(long)]
    pub output: PathBuf,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sets the noise level from the SNR of the first tone (dB).
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for report.csv and trials.jsonl.
    #[arg(long)]
    pub output: PathBuf,
    /// Base seed of the experiment.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// SNR grid in dB, comma separated ("inf" for noise-free).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr: Option<Vec<String>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[command(flatten)]
    pub rfsa: RfsaOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Map,
    Evt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Uniform,
    Nonuniform,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RfsaOverrides {
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
    #[arg(long)]
    pub evt_alpha: Option<f64>,
    /// Lowest trial frequency, rad/s.
    #[arg(long)]
    pub freq_min: Option<f64>,
    /// Highest trial frequency, rad/s.
    #[arg(long)]
    pub freq_max: Option<f64>,
    #[arg(long)]
    pub lm_steps: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

const DEFAULT_EVT_ALPHA: f64 = 0.005;

impl RfsaOverrides {
    pub fn apply(&self, cfg: &mut RfsaConfig) -> Result<()> {
        if let Some(j) = self.grid_size {
            cfg.grid_size = j;
        }
        if let Some(m) = self.max_order {
            cfg.max_order = m;
        }
        if let Some(w) = self.freq_min {
            cfg.freq_range[0] = w;
        }
        if let Some(w) = self.freq_max {
            cfg.freq_range[1] = w;
        }
        if let Some(l) = self.lm_steps {
            cfg.lm.max_steps = l;
        }
        if let Some(mode) = self.mode {
            cfg.mode = match mode {
                ModeArg::Auto => ModeSelect::Auto,
                ModeArg::Uniform => ModeSelect::Uniform,
                ModeArg::Nonuniform => ModeSelect::Nonuniform,
            };
        }
        cfg.penalty = match (self.penalty, self.evt_alpha, cfg.penalty) {
            (Some(PenaltyArg::Map), Some(_), _) => bail!("--evt-alpha only applies to --penalty evt"),
            (Some(PenaltyArg::Map), None, _) => PenaltyRule::Map,
            (Some(PenaltyArg::Evt), alpha, current) => PenaltyRule::Evt {
                alpha: alpha.unwrap_or(match current {
                    PenaltyRule::Evt { alpha } => alpha,
                    PenaltyRule::Map => DEFAULT_EVT_ALPHA,
                }),
            },
            (None, Some(alpha), PenaltyRule::Evt { .. }) => PenaltyRule::Evt { alpha },
            (None, Some(_), PenaltyRule::Map) => bail!("--evt-alpha requires --penalty evt"),
            (None, None, current) => current,
        };
        cfg.validate().context("invalid decomposition settings")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub schema: String,
    #[serde(default)]
    pub rfsa: RfsaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub schema: String,
    pub spec: SignalSpec,
    pub pattern: SamplingPattern,
    /// Noise seed.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub schema: String,
    pub experiment: McExperiment,
}

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        bail!("unsupported schema {found:?}, expected {expected:?}");
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_decompose_config(path: &Path) -> Result<DecomposeConfig> {
    let cfg: DecomposeConfig = read_json(path)?;
    check_schema(&cfg.schema, DECOMPOSE_SCHEMA)?;
    Ok(cfg)
}

pub fn load_generate_config(path: &Path) -> Result<GenerateConfig> {
    let cfg: GenerateConfig = read_json(path)?;
    check_schema(&cfg.schema, GENERATE_SCHEMA)?;
    Ok(cfg)
}

pub fn load_bench_config(path: &Path) -> Result<BenchConfig> {
    let cfg: BenchConfig = read_json(path)?;
    check_schema(&cfg.schema, BENCH_SCHEMA)?;
    Ok(cfg)
}

/// Shortest round-trip decimal; `nan`, `inf`, `-inf` for non-finite values.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn fmt_time(t: f64) -> String {
    format!("{:.10}", round_time(t))
}

/// Reads a CSV with header `t,w`.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers().context("reading CSV header")?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "w" {
        bail!("expected CSV header \"t,w\", found {:?}", headers.iter().collect::<Vec<_>>().join(","));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.context("malformed CSV")?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            bail!("line {line}: expected 2 fields, found {}", rec.len());
        }
        let parse = |i: usize, name: &str| -> Result<f64> {
            rec[i].parse::<f64>().with_context(|| format!("line {line}: cannot parse {name} = {:?}", &rec[i]))
        };
        times.push(parse(0, "t")?);
        values.push(parse(1, "w")?);
    }
    if times.len() < 3 {
        bail!("need at least 3 data rows, found {}", times.len());
    }
    TimeSeries::from_pairs(times, values).context("invalid time series")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).with_context(|| format!("creating {}", path.display()))
}

/// Writes `report.json` and `reconstruction.csv` into `output`.
pub fn cmd_decompose(input: &Path, output: &Path, cfg: &RfsaConfig) -> Result<DecompositionReport> {
    let series = read_series_csv(input)?;
    let report = decompose(&series, cfg)?;
    let recon = reconstruct(&report.model, series.grid())?;

    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    let mut json = create(&output.join("report.json"))?;
    serde_json::to_writer_pretty(&mut json, &report)?;
    json.write_all(b"\n")?;
    json.flush()?;

    let mut wtr = csv::Writer::from_writer(create(&output.join("reconstruction.csv"))?);
    wtr.write_record(["t", "w", "reconstructed", "residual"])?;
    for ((&t, &w), &r) in series.times().iter().zip(series.values()).zip(&recon) {
        wtr.write_record([fmt_time(t), fmt_num(w), fmt_num(r), fmt_num(w - r)])?;
    }
    wtr.flush()?;
    Ok(report)
}

/// Sidecar path `<stem>.spec.json` next to `output`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map_or_else(|| "signal".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.spec.json"))
}

/// Writes the signal CSV and the resolved configuration.
pub fn cmd_generate(cfg: &GenerateConfig, output: &Path) -> Result<TimeSeries> {
    check_schema(&cfg.schema, GENERATE_SCHEMA)?;
    cfg.spec.validate().context("invalid spec")?;
    cfg.pattern.validate().context("invalid pattern")?;
    let grid = sample_times(&cfg.pattern)?;
    let series = generate(&cfg.spec, &grid, cfg.seed)?;

    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut wtr = csv::Writer::from_writer(create(output)?);
    wtr.write_record(["t", "w"])?;
    for (&t, &w) in series.times().iter().zip(series.values()) {
        wtr.write_record([fmt_time(t), fmt_num(w)])?;
    }
    wtr.flush()?;

    let mut side = create(&sidecar_path(output))?;
    serde_json::to_writer_pretty(&mut side, cfg)?;
    side.write_all(b"\n")?;
    side.flush()?;
    Ok(series)
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: McReport,
    /// SNRs whose failed-trial fraction exceeds [`MAX_FAILED_FRACTION`].
    pub failing_rows: Vec<f64>,
}

/// Writes `report.csv` and `trials.jsonl` into `output`.
pub fn cmd_bench(exp: &McExperiment, output: &Path, workers: Option<usize>) -> Result<BenchOutcome> {
    let report = run_mc(exp, workers)?;
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;

    let mut wtr = csv::Writer::from_writer(create(&output.join("report.csv"))?);
    wtr.write_record(["snr_db", "metric", "target", "value"])?;
    for row in report.long_rows() {
        wtr.write_record([
            fmt_num(row.snr_db),
            row.metric.to_string(),
            row.target.map_or_else(String::new, |t| t.to_string()),
            fmt_num(row.value.unwrap_or(f64::NAN)),
        ])?;
    }
    wtr.flush()?;

    let mut log = create(&output.join("trials.jsonl"))?;
    for rec in &report.trials {
        serde_json::to_writer(&mut log, rec)?;
        log.write_all(b"\n")?;
    }
    log.flush()?;

    let failing_rows =
        report.rows.iter().filter(|r| r.failure_fraction() > MAX_FAILED_FRACTION).map(|r| r.snr_db).collect();
    Ok(BenchOutcome { report, failing_rows })
}

fn parse_snr(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        other => other.parse().with_context(|| format!("invalid SNR {other:?}")),
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Decompose(args) => {
            let mut cfg = match &args.config {
                Some(p) => load_decompose_config(p)?.rfsa,
                None => RfsaConfig::default(),
            };
            args.rfsa.apply(&mut cfg)?;
            let report = cmd_decompose(&args.input, &args.output, &cfg)?;
            eprintln!("selected order {} (residual sse {})", report.model.selected_order, fmt_num(report.residual_sse));
            Ok(0)
        }
        Command::Generate(args) => {
            let mut cfg = load_generate_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(snr) = args.snr {
                let reference = cfg.spec.tones.first().map_or(1.0, |t| t.amplitude);
                cfg.spec.noise_sigma = snr_to_sigma(reference, snr)?;
            }
            cmd_generate(&cfg, &args.output)?;
            Ok(0)
        }
        Command::Bench(args) => {
            let mut exp = load_bench_config(&args.config)?.experiment;
            if let Some(seed) = args.seed {
                exp.base_seed = seed;
            }
            if let Some(trials) = args.trials {
                exp.trials = trials;
            }
            if let Some(snr) = &args.snr {
                exp.snr_db = snr.iter().map(|s| parse_snr(s)).collect::<Result<_>>()?;
            }
            args.rfsa.apply(&mut exp.rfsa)?;
            let out = cmd_bench(&exp, &args.output, args.workers)?;
            for row in &out.report.rows {
                eprintln!(
                    "snr {:>6} dB: P(correct order) {:.3}, failed {}, runtime mean {:.4} s, max {:.4} s",
                    fmt_num(row.snr_db),
                    row.order_probability,
                    row.failed,
                    row.mean_runtime_s,
                    row.max_runtime_s
                );
            }
            if out.failing_rows.is_empty() {
                Ok(0)
            } else {
                eprintln!("more than half of the trials failed at SNR {:?}", out.failing_rows);
                Ok(2)
            }
        }
    }
}
