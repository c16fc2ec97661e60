//! `linpois` command-line front end.
//!
//! Exit codes: 0 success, 1 unreadable or invalid input, 2 fit failure,
//! 64 usage error.

mod render;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linpois::baselines::{chi2_fit, ols_on_dataset};
use linpois::gof::{gof_test, GofReport};
use linpois::simulate::{calibrate, ParentModel};
use linpois::uncertainty::{
    confidence_band, covariance_delta, covariance_fisher, derived_error, CovMatrix2, Derived,
    VarianceSource,
};
use linpois::{solve, BinnedDataset, Error, ScargleFit, Schema, SolverConfig};
use std::io::Read;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "linpois",
    version,
    about = "Linear regression for Poisson count data"
)]
struct Cli {
    /// Output format (default: csv for `band`, table otherwise).
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the line, report covariance, slope and goodness of fit.
    Fit(FitArgs),
    /// Slope from the ML fit, OLS and the chi-square fit side by side.
    Compare(FitArgs),
    /// Expected counts and their one-sigma band over the data range.
    Band(BandArgs),
    /// Fit synthetic datasets and report the calibration of the errors.
    Simulate(SimArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Input schema; detected from the header when omitted.
    #[arg(long, value_enum)]
    schema: Option<SchemaArg>,
    /// Reference point x_A (defaults to the lower edge of the first bin).
    #[arg(long, allow_negative_numbers = true)]
    xa: Option<f64>,
    /// Rebin before fitting, e.g. `2-3,4-5,7..16`: `i-j` merges bins i..=j
    /// into one, `i..j` keeps bins i..=j as they are. Unlisted bins are dropped.
    #[arg(long)]
    groups: Option<String>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.90, value_parser = probability)]
    confidence: f64,
    /// Variances used by the delta-method covariance.
    #[arg(long, value_enum, default_value_t = VarianceArg::Model)]
    variance_source: VarianceArg,
    /// Covariance behind the reported errors.
    #[arg(long, value_enum, default_value_t = CovArg::Fisher)]
    cov_method: CovArg,
}

#[derive(Args, Debug)]
struct BandArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Number of equally spaced points from x_A to x_B.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Interval width the expected counts refer to.
    #[arg(long, default_value_t = 1.0)]
    dx: f64,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    /// Number of unit bins starting at x = 0.
    #[arg(long)]
    bins: usize,
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemaArg {
    Edges,
    Cumulative,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VarianceArg {
    Model,
    Observed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CovArg {
    Fisher,
    Delta,
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} is not in (0, 1)"))
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Fit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Fit(_) => 2,
            Failure::Usage(_) => 64,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameters(_) => Failure::Input(e.to_string()),
            _ if e.is_input_error() => Failure::Input(e.to_string()),
            _ => Failure::Fit(e.to_string()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(64),
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.format.unwrap_or(Format::Table)),
        Command::Compare(a) => cmd_compare(a, cli.format.unwrap_or(Format::Table)),
        Command::Band(a) => cmd_band(a, cli.format.unwrap_or(Format::Csv)),
        Command::Simulate(a) => cmd_simulate(a, cli.format.unwrap_or(Format::Table)),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Input(m) => eprintln!("input error: {m}"),
                Failure::Fit(m) => eprintln!("fit error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

/// Parses `2-3,4-5,7..16`.
fn parse_groups(spec: &str) -> Outcome<Vec<RangeInclusive<usize>>> {
    let bad = || Failure::Usage(format!("cannot parse groups {spec:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let mut out = Vec::new();
    for item in spec.split(',') {
        if let Some((lo, hi)) = item.split_once("..") {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if hi < lo {
                return Err(bad());
            }
            out.extend((lo..=hi).map(|i| i..=i));
        } else if let Some((lo, hi)) = item.split_once('-') {
            out.push(num(lo)?..=num(hi)?);
        } else {
            let i = num(item)?;
            out.push(i..=i);
        }
    }
    Ok(out)
}

fn detect_schema(text: &str) -> Schema {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if header.starts_with("index") {
        Schema::Cumulative
    } else {
        Schema::Edges
    }
}

fn load(args: &InputArgs) -> Outcome<BinnedDataset> {
    let mut text = String::new();
    let read = if args.input.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)
    } else {
        std::fs::File::open(&args.input).and_then(|mut f| f.read_to_string(&mut text))
    };
    read.map_err(|e| Failure::Input(format!("{}: {e}", args.input.display())))?;
    let schema = match args.schema {
        Some(SchemaArg::Edges) => Schema::Edges,
        Some(SchemaArg::Cumulative) => Schema::Cumulative,
        None => detect_schema(&text),
    };
    let mut ds = BinnedDataset::read_csv(text.as_bytes(), schema)?;
    if let Some(spec) = &args.groups {
        let (merged, dropped) = ds.rebin_with_dropped(&parse_groups(spec)?)?;
        for b in dropped {
            let inside = b.x_lo >= merged.x_a() && b.x_hi <= merged.x_b();
            eprintln!(
                "warning: bin [{}, {}) with {} counts dropped{}",
                b.x_lo,
                b.x_hi,
                b.count,
                if inside {
                    "; its range is treated as a gap"
                } else {
                    ""
                }
            );
        }
        ds = merged;
    }
    if let Some(xa) = args.xa {
        ds = ds.with_x_a(xa)?;
    }
    Ok(ds)
}

/// Everything `fit`, `compare` and `band` report about one dataset.
struct Analysis {
    ds: BinnedDataset,
    fit: ScargleFit,
    fisher: CovMatrix2,
    delta: CovMatrix2,
    gof: GofReport,
    chosen: CovArg,
}

impl Analysis {
    fn cov(&self) -> &CovMatrix2 {
        match self.chosen {
            CovArg::Fisher => &self.fisher,
            CovArg::Delta => &self.delta,
        }
    }

    fn slope(&self) -> (f64, f64) {
        derived_error(&self.fit.params, self.cov(), Derived::Slope)
    }
}

fn analyse(args: &FitArgs) -> Outcome<Analysis> {
    let ds = load(&args.input)?;
    let fit = solve(&ds, &SolverConfig::default())?;
    let fisher = covariance_fisher(&fit.params, &ds)?;
    let source = match args.variance_source {
        VarianceArg::Model => VarianceSource::ModelMean,
        VarianceArg::Observed => VarianceSource::Observed,
    };
    let delta = covariance_delta(&fit.params, &ds, source)?;
    let gof = gof_test(&fit.params, &ds, args.confidence, None)?;
    Ok(Analysis {
        ds,
        fit,
        fisher,
        delta,
        gof,
        chosen: args.cov_method,
    })
}

fn cmd_fit(args: &FitArgs, format: Format) -> Outcome<String> {
    let an = analyse(args)?;
    Ok(render::fit(&an, format))
}

/// One row of the method comparison.
#[derive(serde::Serialize, Debug)]
struct MethodRow {
    method: &'static str,
    slope: f64,
    slope_sigma: f64,
}

fn cmd_compare(args: &FitArgs, format: Format) -> Outcome<String> {
    let an = analyse(args)?;
    let (s, e) = an.slope();
    let mut rows = vec![MethodRow {
        method: "C-stat",
        slope: s,
        slope_sigma: e,
    }];
    let mut notices = Vec::new();
    match ols_on_dataset(&an.ds) {
        Ok(r) => rows.push(MethodRow {
            method: "OLS",
            slope: r.slope,
            slope_sigma: r.slope_sigma_standard,
        }),
        Err(e) => notices.push(format!("OLS omitted: {e}")),
    }
    if let Some(i) = an.ds.bins().iter().position(|b| b.count == 0) {
        notices.push(format!(
            "chi-square omitted: bin {i} has zero counts and no defined weight"
        ));
    } else {
        let c = chi2_fit(&an.ds)?;
        rows.push(MethodRow {
            method: "chi2",
            slope: c.params.1,
            slope_sigma: c.slope_error,
        });
    }
    for n in &notices {
        eprintln!("notice: {n}");
    }
    Ok(render::compare(&rows, &notices, format))
}

fn cmd_band(args: &BandArgs, format: Format) -> Outcome<String> {
    if args.points < 2 {
        return Err(Failure::Usage(format!(
            "--points must be at least 2, got {}",
            args.points
        )));
    }
    if args.dx.is_nan() || args.dx <= 0.0 || args.dx.is_infinite() {
        return Err(Failure::Usage(format!(
            "--dx must be positive, got {}",
            args.dx
        )));
    }
    let an = analyse(&args.fit)?;
    let (lo, hi) = (an.ds.x_a(), an.ds.x_b());
    let n = args.points;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let band = confidence_band(&an.fit.params, an.cov(), &xs, args.dx);
    Ok(render::band(&band, format))
}

fn cmd_simulate(args: &SimArgs, format: Format) -> Outcome<String> {
    if args.replicates < 100 {
        return Err(Failure::Usage(format!(
            "--replicates must be at least 100, got {}",
            args.replicates
        )));
    }
    let parent = ParentModel {
        lambda: args.lambda,
        a: args.a,
        n_bins: args.bins,
    };
    let summary = calibrate(parent, args.replicates, args.seed)?;
    Ok(render::simulate(&summary, format))
}
