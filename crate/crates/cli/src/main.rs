use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use loscure::conditional::{
    beran_estimate, npmcm_conditional_estimate, Bandwidth, CovariateQuery, Kernel, KernelConfig,
    SexFilter,
};
use loscure::ingest::{
    derive_endpoint, parse_linelist, read_observations, summarize, Endpoint, LineListRecord,
};
use loscure::pipeline::{calibrate, CalibrationMode};
use loscure::sim::{
    capacity_excess, capacity_excess_from_means, compare_conditional_with, read_occupancy_csv,
    write_capacity_csv, SimulationConfig, Simulator,
};
use loscure::survival::{
    empirical_estimate, event_probability, km_estimate, km_estimate_reduced, latency,
    npmcm_estimate,
};
use loscure::weibull::{fit_weibull_with, FitOptions};
use loscure::{Observation, SurvivalCurve};
use serde_json::json;

/// Length-of-stay estimation with known cures, and hospital demand simulation.
#[derive(Debug, Parser)]
#[command(name = "loscure", version)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a line list, report diagnostics and counts, write endpoint datasets.
    Ingest(IngestArgs),
    /// Estimate a survival curve for one endpoint.
    Estimate(EstimateArgs),
    /// Fit a Weibull law to a latency curve.
    Weibull(WeibullArgs),
    /// Run the outbreak simulator.
    Simulate(SimulateArgs),
    /// Days on which mean occupancy exceeds each capacity.
    Capacity(CapacityArgs),
    /// Simulate with pooled and with stratified tables and contrast the two.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct LineListArgs {
    /// Line-list CSV.
    #[arg(long)]
    linelist: Option<PathBuf>,

    /// Last day of follow-up (YYYY-MM-DD); required with --linelist.
    #[arg(long)]
    study_end: Option<NaiveDate>,

    /// Fail if any line-list row is rejected.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    source: LineListArgs,

    /// Only this endpoint (all six with --out-dir otherwise).
    #[arg(long)]
    endpoint: Option<Endpoint>,

    /// Directory for `<endpoint>.csv` files and `summary.json`. Without it,
    /// the endpoint dataset (or the summary) goes to stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimator {
    Km,
    KmReduced,
    Empirical,
    Npmcm,
    Beran,
    NpmcmCond,
}

impl Estimator {
    fn is_conditional(self) -> bool {
        matches!(self, Estimator::Beran | Estimator::NpmcmCond)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CovariateArgs {
    /// Query age for conditional estimators.
    #[arg(long)]
    age: Option<f64>,

    /// Sex stratum: male, female or any.
    #[arg(long)]
    sex: Option<SexFilter>,

    /// Kernel bandwidth in years, or `auto`.
    #[arg(long)]
    bandwidth: Option<Bandwidth>,

    /// Kernel: epanechnikov or gaussian.
    #[arg(long)]
    kernel: Option<Kernel>,
}

impl CovariateArgs {
    fn any_set(&self) -> bool {
        self.age.is_some()
            || self.sex.is_some()
            || self.bandwidth.is_some()
            || self.kernel.is_some()
    }

    fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            kernel: self.kernel.unwrap_or_default(),
            bandwidth: self.bandwidth.unwrap_or_default(),
        }
    }
}

#[derive(Debug, Args)]
struct ObservationArgs {
    #[command(flatten)]
    source: LineListArgs,

    /// Endpoint to derive from the line list.
    #[arg(long)]
    endpoint: Option<Endpoint>,

    /// Endpoint dataset CSV (`time,event,known_cure,age,sex`) instead of a line list.
    #[arg(long, conflicts_with_all = ["linelist", "endpoint"])]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: ObservationArgs,

    #[arg(long, value_enum, default_value = "npmcm")]
    estimator: Estimator,

    #[command(flatten)]
    covariates: CovariateArgs,

    /// Emit the latency curve of susceptibles instead of the overall curve.
    #[arg(long)]
    latency: bool,

    #[arg(long, value_enum, default_value = "csv")]
    format: Format,

    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WeibullArgs {
    /// Latency curve CSV (`t,survival`). Without it the latency of the
    /// known-cure estimate of the selected endpoint is fitted.
    #[arg(long, conflicts_with_all = ["linelist", "dataset", "endpoint"])]
    curve: Option<PathBuf>,

    #[command(flatten)]
    input: ObservationArgs,

    #[arg(long, default_value_t = 500)]
    max_iterations: usize,

    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,

    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CapacityRanges {
    /// Ward capacities to test, `LOW-HIGH`.
    #[arg(long, default_value = "15-90", value_parser = parse_range)]
    hw_capacity: RangeInclusive<u32>,

    /// ICU capacities to test, `LOW-HIGH`.
    #[arg(long, default_value = "5-15", value_parser = parse_range)]
    icu_capacity: RangeInclusive<u32>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config JSON (built-in defaults if omitted).
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    replications: Option<u32>,

    /// Calibrate transition and duration tables from this line list.
    #[command(flatten)]
    calibration: LineListArgs,

    /// Calibrate per sex and age band instead of pooled.
    #[arg(long, requires = "linelist")]
    conditional: bool,

    /// Kernel bandwidth in years, or `auto` (with --conditional).
    #[arg(long, requires = "conditional")]
    bandwidth: Option<Bandwidth>,

    /// Kernel (with --conditional).
    #[arg(long, requires = "conditional")]
    kernel: Option<Kernel>,

    #[command(flatten)]
    ranges: CapacityRanges,

    /// Directory for occupancy.csv, capacity.csv and metadata.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CapacityArgs {
    /// occupancy.csv written by `simulate`.
    #[arg(long)]
    occupancy: PathBuf,

    #[command(flatten)]
    ranges: CapacityRanges,

    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Base config JSON (built-in defaults if omitted).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Config with stratified tables. Without it, both tables are
    /// calibrated from --linelist.
    #[arg(long)]
    conditional_config: Option<PathBuf>,

    #[command(flatten)]
    calibration: LineListArgs,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    replications: Option<u32>,

    #[arg(long)]
    bandwidth: Option<Bandwidth>,

    #[arg(long)]
    kernel: Option<Kernel>,

    #[command(flatten)]
    ranges: CapacityRanges,

    /// Directory for divergence.csv, capacity_comparison.csv, both occupancy
    /// series and summary.json.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    let (lo, hi) = s
        .split_once('-')
        .ok_or_else(|| format!("expected LOW-HIGH, got `{s}`"))?;
    let lo: u32 = lo.trim().parse().map_err(|e| format!("`{lo}`: {e}"))?;
    let hi: u32 = hi.trim().parse().map_err(|e| format!("`{hi}`: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}-{hi}"));
    }
    Ok(lo..=hi)
}

/// Bad flags or flag combinations (exit 1) versus problems with the data
/// or the work itself (exit 2).
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

macro_rules! usage {
    ($($arg:tt)*) => {
        return Err(Failure::Usage(anyhow!($($arg)*)))
    };
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Estimate(a) => estimate(a),
        Command::Weibull(a) => weibull(a),
        Command::Simulate(a) => simulate(a),
        Command::Capacity(a) => capacity(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn load_linelist(args: &LineListArgs) -> Outcome<Option<(Vec<LineListRecord>, NaiveDate)>> {
    let Some(path) = &args.linelist else {
        if args.study_end.is_some() {
            usage!("--study-end needs --linelist");
        }
        return Ok(None);
    };
    let Some(study_end) = args.study_end else {
        usage!("--linelist needs --study-end");
    };
    let list = parse_linelist(open(path)?, study_end)
        .with_context(|| format!("reading {}", path.display()))?;
    for d in &list.notes {
        info!("{d}");
    }
    for d in &list.rejected {
        warn!("rejected {d}");
    }
    if !list.rejected.is_empty() {
        warn!(
            "{} row(s) rejected from {}",
            list.rejected.len(),
            path.display()
        );
    }
    let records = if args.strict {
        list.into_strict()
            .with_context(|| format!("reading {}", path.display()))?
    } else {
        list.records
    };
    Ok(Some((records, study_end)))
}

fn load_observations(args: &ObservationArgs) -> Outcome<(Vec<Observation>, Option<Endpoint>)> {
    if let Some(path) = &args.dataset {
        let obs = read_observations(open(path)?)
            .with_context(|| format!("reading {}", path.display()))?;
        return Ok((obs, None));
    }
    if args.source.linelist.is_none() {
        usage!("one of --linelist or --dataset is required");
    }
    let Some(endpoint) = args.endpoint else {
        usage!("--linelist needs --endpoint");
    };
    let (records, study_end) = load_linelist(&args.source)?.expect("checked above");
    let ds = derive_endpoint(&records, endpoint, study_end);
    info!(
        "{endpoint}: {} observations, {} records skipped",
        ds.observations.len(),
        ds.skipped
    );
    Ok((ds.observations, Some(endpoint)))
}

fn ingest(args: IngestArgs) -> Outcome {
    if args.source.linelist.is_none() {
        usage!("--linelist is required");
    }
    let (records, study_end) = load_linelist(&args.source)?.expect("checked above");
    let summary = summarize(&records, study_end);
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let endpoints = args.endpoint.map_or(Endpoint::ALL.to_vec(), |e| vec![e]);
            for e in endpoints {
                let ds = derive_endpoint(&records, e, study_end);
                ds.write_csv(create(dir, &format!("{e}.csv"))?)
                    .context("writing dataset")?;
            }
            let mut w = create(dir, "summary.json")?;
            serde_json::to_writer_pretty(&mut w, &summary).context("writing summary")?;
            writeln!(w).context("writing summary")?;
        }
        None => {
            let mut w = output(None)?;
            match args.endpoint {
                Some(e) => derive_endpoint(&records, e, study_end)
                    .write_csv(&mut w)
                    .context("writing dataset")?,
                None => {
                    serde_json::to_writer_pretty(&mut w, &summary).context("writing summary")?;
                    writeln!(w).context("writing summary")?;
                }
            }
            w.flush().context("writing output")?;
        }
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Outcome {
    let cov = &args.covariates;
    let query = if args.estimator.is_conditional() {
        let Some(age) = cov.age else {
            usage!("--estimator {:?} needs --age", args.estimator);
        };
        Some(
            CovariateQuery::new(age, cov.sex.unwrap_or(SexFilter::Any))
                .map_err(|e| Failure::Usage(e.into()))?,
        )
    } else {
        if cov.any_set() {
            usage!("--age, --sex, --bandwidth and --kernel apply only to beran and npmcm-cond");
        }
        None
    };
    if args.latency && !matches!(args.estimator, Estimator::Npmcm | Estimator::NpmcmCond) {
        usage!("--latency needs a known-cure estimator (npmcm or npmcm-cond)");
    }
    let (obs, endpoint) = load_observations(&args.input)?;

    let kernel = cov.kernel_config();
    let curve = match (args.estimator, &query) {
        (Estimator::Km, _) => km_estimate(&obs),
        (Estimator::KmReduced, _) => km_estimate_reduced(&obs),
        (Estimator::Empirical, _) => empirical_estimate(&obs),
        (Estimator::Npmcm, _) => npmcm_estimate(&obs),
        (Estimator::Beran, Some(q)) => beran_estimate(&obs, q, &kernel),
        (Estimator::NpmcmCond, Some(q)) => npmcm_conditional_estimate(&obs, q, &kernel),
        _ => unreachable!("conditional estimators always carry a query"),
    }
    .context("estimating")?;

    let (emitted, p) = if args.latency {
        let est = latency(&curve).context("splitting incidence and latency")?;
        (est.latency, est.p)
    } else {
        let p = event_probability(&curve);
        (curve, p)
    };

    let mut w = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => emitted.write_csv(&mut w).context("writing curve")?,
        Format::Json => {
            let doc = json!({
                "estimator": format!("{:?}", args.estimator).to_lowercase(),
                "endpoint": endpoint.map(Endpoint::as_str),
                "n": obs.len(),
                "query": query,
                "latency": args.latency,
                "event_probability": p,
                "curve": emitted,
            });
            serde_json::to_writer_pretty(&mut w, &doc).context("writing curve")?;
            writeln!(w).context("writing curve")?;
        }
    }
    w.flush().context("writing curve")?;
    Ok(())
}

fn weibull(args: WeibullArgs) -> Outcome {
    if !(args.tolerance.is_finite() && args.tolerance > 0.0) {
        usage!("--tolerance must be positive");
    }
    if args.max_iterations == 0 {
        usage!("--max-iterations must be at least 1");
    }
    let curve = match &args.curve {
        Some(path) => SurvivalCurve::read_csv(open(path)?)
            .with_context(|| format!("reading {}", path.display()))?,
        None => {
            let (obs, _) = load_observations(&args.input)?;
            let np = npmcm_estimate(&obs).context("estimating")?;
            latency(&np)
                .context("splitting incidence and latency")?
                .latency
        }
    };
    let options = FitOptions {
        max_iterations: args.max_iterations,
        tolerance: args.tolerance,
        trace: false,
    };
    let report = fit_weibull_with(&curve, &options).context("fitting")?;
    if !report.converged {
        warn!(
            "fit stopped at {} iterations without converging",
            report.iterations
        );
    }
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report).context("writing fit")?;
    writeln!(w).context("writing fit")?;
    w.flush().context("writing fit")?;
    Ok(())
}

fn base_config(
    path: Option<&Path>,
    seed: Option<u64>,
    replications: Option<u32>,
) -> Outcome<SimulationConfig> {
    if replications == Some(0) {
        usage!("--replications must be at least 1");
    }
    let mut config = match path {
        Some(p) => SimulationConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SimulationConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(r) = replications {
        config.n_replications = r;
    }
    Ok(config)
}

fn simulate(args: SimulateArgs) -> Outcome {
    let mut config = base_config(args.config.as_deref(), args.seed, args.replications)?;
    let mut calibration = None;
    if let Some((records, study_end)) = load_linelist(&args.calibration)? {
        let mode = if args.conditional {
            CalibrationMode::Conditional(KernelConfig {
                kernel: args.kernel.unwrap_or_default(),
                bandwidth: args.bandwidth.unwrap_or_default(),
            })
        } else {
            CalibrationMode::Unconditional
        };
        let cal = calibrate(&records, study_end, mode).context("calibrating from line list")?;
        for f in &cal.fallbacks {
            warn!("pooled estimate used for {f}");
        }
        cal.apply(&mut config);
        calibration = Some(cal);
    }

    let series = Simulator::new(config.clone())
        .context("configuring simulator")?
        .run();
    let rows = capacity_excess(
        &series,
        args.ranges.hw_capacity.clone(),
        args.ranges.icu_capacity.clone(),
    )
    .context("capacity analysis")?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    series
        .write_csv(create(dir, "occupancy.csv")?)
        .context("writing occupancy")?;
    write_capacity_csv(&rows, create(dir, "capacity.csv")?).context("writing capacity")?;
    let meta = json!({
        "run": series.metadata,
        "config": config,
        "calibration": calibration,
    });
    let mut w = create(dir, "metadata.json")?;
    serde_json::to_writer_pretty(&mut w, &meta).context("writing metadata")?;
    writeln!(w).context("writing metadata")?;
    w.flush().context("writing metadata")?;
    if series.metadata.truncated {
        warn!(
            "{} individual(s) still in hospital at the horizon",
            series.metadata.truncated_individuals
        );
    }
    Ok(())
}

fn capacity(args: CapacityArgs) -> Outcome {
    let summary = read_occupancy_csv(open(&args.occupancy)?)
        .with_context(|| format!("reading {}", args.occupancy.display()))?;
    let hw: Vec<f64> = summary.iter().map(|d| d.mean_hw).collect();
    let icu: Vec<f64> = summary.iter().map(|d| d.mean_icu).collect();
    let rows =
        capacity_excess_from_means(&hw, &icu, args.ranges.hw_capacity, args.ranges.icu_capacity)
            .context("capacity analysis")?;
    let mut w = output(args.out.as_deref())?;
    write_capacity_csv(&rows, &mut w).context("writing capacity")?;
    w.flush().context("writing capacity")?;
    Ok(())
}

fn compare(args: CompareArgs) -> Outcome {
    let base = base_config(args.config.as_deref(), args.seed, args.replications)?;
    let linelist = load_linelist(&args.calibration)?;
    let (unconditional, conditional) = match (&args.conditional_config, linelist) {
        (Some(_), Some(_)) => usage!("give either --conditional-config or --linelist, not both"),
        (None, None) => usage!("one of --conditional-config or --linelist is required"),
        (Some(path), None) => {
            if args.bandwidth.is_some() || args.kernel.is_some() {
                usage!("--bandwidth and --kernel apply only with --linelist");
            }
            let c = base_config(Some(path), args.seed, args.replications)?;
            (base, c)
        }
        (None, Some((records, study_end))) => {
            let kernel = KernelConfig {
                kernel: args.kernel.unwrap_or_default(),
                bandwidth: args.bandwidth.unwrap_or_default(),
            };
            let pooled = calibrate(&records, study_end, CalibrationMode::Unconditional)
                .context("calibrating pooled tables")?;
            let strat = calibrate(&records, study_end, CalibrationMode::Conditional(kernel))
                .context("calibrating stratified tables")?;
            for f in &strat.fallbacks {
                warn!("pooled estimate used for {f}");
            }
            let mut u = base.clone();
            pooled.apply(&mut u);
            let mut c = base;
            strat.apply(&mut c);
            (u, c)
        }
    };
    let cmp = compare_conditional_with(
        &unconditional,
        &conditional,
        args.ranges.hw_capacity,
        args.ranges.icu_capacity,
    )
    .context("comparing")?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    cmp.write_divergence_csv(create(dir, "divergence.csv")?)
        .context("writing divergence")?;
    cmp.write_capacity_csv(create(dir, "capacity_comparison.csv")?)
        .context("writing capacity")?;
    cmp.unconditional
        .write_csv(create(dir, "occupancy_unconditional.csv")?)
        .context("writing occupancy")?;
    cmp.conditional
        .write_csv(create(dir, "occupancy_conditional.csv")?)
        .context("writing occupancy")?;
    let doc = json!({
        "max_abs_divergence": cmp.summary,
        "unconditional": cmp.unconditional.metadata,
        "conditional": cmp.conditional.metadata,
    });
    let mut w = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &doc).context("writing summary")?;
    writeln!(w).context("writing summary")?;
    w.flush().context("writing summary")?;
    Ok(())
}
