//! The `unifluct` command-line tool.
//!
//! Every command either exits 0 after writing a complete result, or exits
//! nonzero after printing `{"error":{"kind":..,"message":..}}` to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alpha_scan::{
    refine, scan, ScanConfig, DEFAULT_ALPHA_MAX, DEFAULT_ALPHA_MIN, DEFAULT_ALPHA_STEP, DEFAULT_REFINE_WIDTH,
    MIN_KS_SAMPLE,
};
use crate::bhp::{
    default_cache_path, load_or_build, BhpParams, BhpTable, Orientation, DEFAULT_GRID_STEP, DEFAULT_LATTICE_SIDE,
};
use crate::collapse::report::{analyze_sign, sha256_hex, BhpMeta, Counts, Meta, Report, SignReport};
use crate::collapse::DEFAULT_BINS;
use crate::error::{Error, Result};
use crate::ks::PValueConvention;
use crate::returns::{compute_returns, partition, PriceSeries, Sign};

#[derive(Debug, Parser)]
#[command(name = "unifluct", version, about = "Data collapse of rescaled daily returns onto the BHP distribution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build (or validate) the cached BHP table.
    BhpTable(TableArgs),
    /// Analyze returns at a fixed exponent α.
    Analyze(AnalyzeArgs),
    /// Find the exponent α maximizing the KS P value, then analyze there.
    Scan(ScanArgs),
    /// Write a synthetic price CSV whose return magnitudes follow the model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignSelection {
    Positive,
    Negative,
    Both,
}

impl SignSelection {
    pub fn signs(self) -> &'static [Sign] {
        match self {
            SignSelection::Positive => &[Sign::Positive],
            SignSelection::Negative => &[Sign::Negative],
            SignSelection::Both => &[Sign::Positive, Sign::Negative],
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SignSelection::Positive => "positive",
            SignSelection::Negative => "negative",
            SignSelection::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationArg {
    Standard,
    Mirrored,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Standard => Orientation::Standard,
            OrientationArg::Mirrored => Orientation::Mirrored,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PValueArg {
    Stephens,
    Asymptotic,
}

impl From<PValueArg> for PValueConvention {
    fn from(p: PValueArg) -> Self {
        match p {
            PValueArg::Stephens => PValueConvention::Stephens,
            PValueArg::Asymptotic => PValueConvention::Asymptotic,
        }
    }
}

/// Which BHP table to use and where it is cached.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Lattice side L (N = L^2 sites).
    #[arg(long = "L", value_name = "N", default_value_t = DEFAULT_LATTICE_SIDE)]
    pub lattice_side: usize,
    /// Table cache file [default: bhp_L<L>.tsv under $UNIFLUCT_CACHE_DIR or the temp dir].
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "standard")]
    pub orientation: OrientationArg,
    /// Tabulation step in μ.
    #[arg(long, value_name = "X", default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
}

impl ModelArgs {
    pub fn params(&self) -> Result<BhpParams> {
        let params = BhpParams::new(self.lattice_side)?;
        let (lo, hi) = (params.grid_min, params.grid_max);
        let params = params.with_grid(lo, hi, self.grid_step).with_orientation(self.orientation.into());
        params.validate()?;
        Ok(params)
    }

    pub fn table_path(&self, params: &BhpParams) -> PathBuf {
        self.table.clone().unwrap_or_else(|| default_cache_path(params))
    }

    pub fn load(&self) -> Result<(BhpTable, PathBuf, bool)> {
        let params = self.params()?;
        let path = self.table_path(&params);
        let (table, rebuilt) = load_or_build(&params, &path)?;
        Ok((table, path, rebuilt))
    }
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

/// Options shared by `analyze` and `scan`.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Price CSV with `date` and `close` columns.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Report destination [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub sign: SignSelection,
    /// Histogram bins for the collapse tables.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "stephens")]
    pub pvalue: PValueArg,
    /// Also write the collapse tables as TSV files into this directory.
    #[arg(long, value_name = "DIR")]
    pub tsv_dir: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long, value_name = "X")]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long, value_name = "X", default_value_t = DEFAULT_ALPHA_MIN)]
    pub alpha_min: f64,
    #[arg(long, value_name = "X", default_value_t = DEFAULT_ALPHA_MAX)]
    pub alpha_max: f64,
    #[arg(long, value_name = "X", default_value_t = DEFAULT_ALPHA_STEP)]
    pub alpha_step: f64,
    /// Final resolution of the local refinement around the best grid point.
    #[arg(long, value_name = "X", default_value_t = DEFAULT_REFINE_WIDTH)]
    pub refine_width: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// CSV destination [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    /// Number of returns (the file has one more price row).
    #[arg(long, value_name = "N", default_value_t = 3000)]
    pub count: usize,
    #[arg(long, value_name = "X", default_value_t = 0.063)]
    pub mu0: f64,
    #[arg(long, value_name = "X", default_value_t = 0.032)]
    pub sigma0: f64,
    #[arg(long, value_name = "X", default_value_t = 0.55)]
    pub alpha0: f64,
    /// Probability that a simulated return is positive.
    #[arg(long, value_name = "P", default_value_t = 0.5)]
    pub positive_fraction: f64,
    #[arg(long, value_name = "DATE", default_value = "2000-01-01")]
    pub start_date: NaiveDate,
    #[arg(long, value_name = "X", default_value_t = 1000.0)]
    pub start_price: f64,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            print_error("usage", &e.to_string());
            return 2;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            print_error(e.kind(), &e.to_string());
            1
        }
    }
}

fn print_error(kind: &str, message: &str) {
    let doc = serde_json::json!({ "error": { "kind": kind, "message": message.trim_end() } });
    eprintln!("{doc}");
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::BhpTable(args) => with_workers(args.workers, || cmd_bhp_table(args)),
        Command::Analyze(args) => with_workers(args.run.workers, || {
            let (table, _, _) = args.run.model.load()?;
            let input = fs::read(&args.run.input)?;
            let report = analyze_report(&input, &table, args)?;
            emit_report(&report, &args.run)
        }),
        Command::Scan(args) => with_workers(args.run.workers, || {
            let (table, _, _) = args.run.model.load()?;
            let input = fs::read(&args.run.input)?;
            let report = scan_report(&input, &table, args)?;
            emit_report(&report, &args.run)
        }),
        Command::Simulate(args) => with_workers(None, || {
            let (table, _, _) = args.model.load()?;
            let csv = simulate_csv(&table, args)?;
            write_output(args.output.as_deref(), csv.as_bytes())
        }),
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(Error::InvalidParameter("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, bytes)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TableSummary {
    path: String,
    rebuilt: bool,
    lattice_side: usize,
    n_sites: usize,
    orientation: Orientation,
    rows: usize,
    normalization_factor: f64,
    mean: f64,
    std_dev: f64,
}

pub fn cmd_bhp_table(args: &TableArgs) -> Result<()> {
    let (table, path, rebuilt) = args.model.load()?;
    let summary = TableSummary {
        path: path.display().to_string(),
        rebuilt,
        lattice_side: table.params().lattice_side,
        n_sites: table.params().n_sites,
        orientation: table.params().orientation,
        rows: table.len(),
        normalization_factor: table.normalization_factor(),
        mean: table.mean(),
        std_dev: table.std_dev(),
    };
    let mut line = serde_json::to_string(&summary).expect("summary is serializable");
    line.push('\n');
    write_output(None, line.as_bytes())
}

struct Prepared {
    digest: String,
    days: usize,
    counts: Counts,
    positives: Vec<f64>,
    negatives: Vec<f64>,
}

fn prepare(input: &[u8]) -> Result<Prepared> {
    let prices = PriceSeries::from_csv(input)?;
    let returns = compute_returns(&prices)?;
    let parts = partition(&returns);
    Ok(Prepared {
        digest: sha256_hex(input),
        days: prices.len(),
        counts: Counts::new(prices.len(), &parts),
        positives: parts.positives,
        negatives: parts.negatives,
    })
}

impl Prepared {
    fn magnitudes(&self, sign: Sign) -> &[f64] {
        match sign {
            Sign::Positive => &self.positives,
            Sign::Negative => &self.negatives,
        }
    }
}

fn base_meta(command: &'static str, data: &Prepared, run: &RunConfig, table: &BhpTable) -> Meta {
    debug_assert_eq!(data.days, data.counts.days);
    Meta {
        tool: "unifluct",
        version: env!("CARGO_PKG_VERSION"),
        command,
        input_sha256: data.digest.clone(),
        sign: run.sign.as_str(),
        alpha: None,
        scan: None,
        refine_width: None,
        bins: run.bins,
        pvalue_convention: run.pvalue.into(),
        min_ks_sample: MIN_KS_SAMPLE,
        bhp: BhpMeta::of(table),
    }
}

fn assemble<'a>(meta: Meta, counts: Counts, sections: Vec<(Sign, SignReport<'a>)>) -> Report<'a> {
    let mut report = Report { meta, counts, positive: None, negative: None };
    for (sign, section) in sections {
        match sign {
            Sign::Positive => report.positive = Some(section),
            Sign::Negative => report.negative = Some(section),
        }
    }
    report
}

/// Fixed-α analysis of the CSV bytes in `input`.
pub fn analyze_report<'a>(input: &[u8], table: &'a BhpTable, args: &AnalyzeArgs) -> Result<Report<'a>> {
    let run = &args.run;
    let data = prepare(input)?;
    let conv = run.pvalue.into();
    let mut sections = Vec::new();
    for &sign in run.sign.signs() {
        let section = analyze_sign(data.magnitudes(sign), sign, args.alpha, table, run.bins, conv, None)?;
        sections.push((sign, section));
    }
    let mut meta = base_meta("analyze", &data, run, table);
    meta.alpha = Some(args.alpha);
    Ok(assemble(meta, data.counts, sections))
}

/// Scan plus refinement, then a full analysis at the best exponent.
pub fn scan_report<'a>(input: &[u8], table: &'a BhpTable, args: &ScanArgs) -> Result<Report<'a>> {
    let run = &args.run;
    let config = ScanConfig {
        alpha_min: args.alpha_min,
        alpha_max: args.alpha_max,
        step: args.alpha_step,
        convention: run.pvalue.into(),
    };
    let data = prepare(input)?;
    let mut sections = Vec::new();
    for &sign in run.sign.signs() {
        let mags = data.magnitudes(sign);
        let coarse = scan(mags, sign, &config, table)?;
        let fine = refine(mags, &coarse, table, args.refine_width, config.convention)?;
        let alpha = fine.alpha_star;
        let section = analyze_sign(mags, sign, alpha, table, run.bins, config.convention, Some(fine))?;
        sections.push((sign, section));
    }
    let mut meta = base_meta("scan", &data, run, table);
    meta.scan = Some(config);
    meta.refine_width = Some(args.refine_width);
    Ok(assemble(meta, data.counts, sections))
}

fn emit_report(report: &Report<'_>, run: &RunConfig) -> Result<()> {
    if let Some(dir) = &run.tsv_dir {
        fs::create_dir_all(dir)?;
        for sign in [Sign::Positive, Sign::Negative] {
            if let Some(section) = report.section(sign) {
                let s = sign.as_str();
                section
                    .histograms
                    .fluctuations
                    .write_tsv(fs::File::create(dir.join(format!("{s}_fluctuations.tsv")))?)?;
                section.histograms.returns.write_tsv(fs::File::create(dir.join(format!("{s}_returns.tsv")))?)?;
            }
        }
    }
    write_output(run.output.as_deref(), report.to_json().as_bytes())
}

/// Synthetic prices: `u` drawn from the BHP table truncated to
/// `u > -mu0 / sigma0`, magnitudes `(sigma0 u + mu0)^(1 / alpha0)`, random
/// signs, compounded from `start_price` over consecutive dates.
pub fn simulate_csv(table: &BhpTable, args: &SimulateArgs) -> Result<String> {
    let SimulateArgs { mu0, sigma0, alpha0, count, seed, start_price, positive_fraction, .. } = *args;
    if !(mu0 > 0.0 && sigma0 > 0.0 && alpha0 > 0.0 && start_price > 0.0) {
        return Err(Error::InvalidParameter("mu0, sigma0, alpha0 and start price must be positive".into()));
    }
    if !(0.0..=1.0).contains(&positive_fraction) {
        return Err(Error::InvalidParameter(format!("positive fraction {positive_fraction} outside [0, 1]")));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("count must be positive".into()));
    }
    let cut = -mu0 / sigma0;
    let trunc = table.truncate(cut, table.params().grid_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut out = String::from("date,close\n");
    let mut date = args.start_date;
    let mut price = start_price;
    out.push_str(&format!("{date},{price}\n"));
    for _ in 0..count {
        let u = loop {
            let u = trunc.draw(&mut rng);
            if u > cut {
                break u;
            }
        };
        let magnitude = (sigma0 * u + mu0).powf(1.0 / alpha0);
        let r = if rng.random::<f64>() < positive_fraction { magnitude } else { -magnitude };
        if r <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "simulated return {r} would make the price non-positive; reduce mu0 or sigma0"
            )));
        }
        price *= 1.0 + r;
        date =
            date.checked_add_days(Days::new(1)).ok_or_else(|| Error::InvalidParameter("date range overflow".into()))?;
        out.push_str(&format!("{date},{price}\n"));
    }
    Ok(out)
}
