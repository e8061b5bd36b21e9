//! Command-line driver.
//!
//! Subcommands: `simulate`, `estimate`, `predict`, `mc-consistency`,
//! `mc-normality`, `mc-berry-esseen`, `mc-tail`, `validate-kernels`.
//! Options come from flags or from a `key = value` config file (`#` starts
//! a comment); flags take precedence. Unknown config keys are rejected.
//!
//! Exit codes: 0 success, 1 configuration or argument error, 2 numeric
//! failure, 3 statistical experiment or validation failure.
//!
//! `SFOU_THREADS` (integer, 0 = auto) overrides the worker count used for
//! replicate-level parallelism.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::cov::{cov_fbm, cov_subfbm, increment_variance};
use crate::error::{Result, SfouError};
use crate::grid::{build_grid, SeedPolicy, SfouScheme, SubfbmMethod};
use crate::hurst::derive_constants;
use crate::inference::{build_cache, mle_with_smoothing, predict};
use crate::kernels::{psi_transform, representation_identity_max_error};
use crate::montecarlo::{
    berry_esseen_experiment, consistency_experiment, normality_experiment, tail_experiment,
    ExperimentReport, McConfig,
};
use crate::quad::QuadratureSpec;
use crate::report::{
    read_paths_csv, write_estimates_csv, write_estimates_json, write_paths_csv,
    write_predictions_json, write_report_csv, write_report_json, EstimateRecord, PredictionRecord,
};
use crate::simulate::{simulate_sfou, simulate_subfbm};

#[derive(Parser)]
#[command(
    name = "sfou",
    version,
    about = "Sub-fractional Brownian motion simulation and drift inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate sub-fBm paths (or the drift process when --theta is given)
    /// and write them as CSV.
    Simulate(SimulateArgs),
    /// Estimate the drift parameter from a paths CSV.
    Estimate(EstimateArgs),
    /// Predict the process beyond the observed horizon.
    Predict(PredictArgs),
    /// Monte Carlo check of estimator consistency across horizons.
    McConsistency(McArgs),
    /// Monte Carlo check of asymptotic normality of the studentized
    /// statistic.
    McNormality(McArgs),
    /// Monte Carlo check of the Berry-Esseen-type bound chain.
    McBerryEsseen(McArgs),
    /// Monte Carlo check of the tail-probability bound.
    McTail(McArgs),
    /// Run the kernel identity suite (representation identity, covariance
    /// ordering, constant fixed point).
    ValidateKernels(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Config file with key = value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hurst index in (0, 1).
    #[arg(long = "h")]
    h: Option<f64>,
    /// Drift parameter; when present the drift process is simulated.
    #[arg(long = "theta", alias = "theta0", allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sub-fBm sampler: cholesky | fbm-fold | kernel-wiener.
    #[arg(long)]
    method: Option<String>,
    /// Drift stepping: exp-euler | plain-euler.
    #[arg(long)]
    scheme: Option<String>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input paths CSV (header rep,t,value).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "h")]
    h: Option<f64>,
    /// Output format: json | csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Smooth the score integrand with a 3-point moving average before
    /// estimating (diagnostic only; biases the estimate).
    #[arg(long = "smooth-j", default_value_t = false)]
    smooth_j: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input paths CSV observed on [0, a].
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "h")]
    h: Option<f64>,
    /// Prediction time; must exceed the observed horizon.
    #[arg(long = "t")]
    t: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "h")]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta0: Option<f64>,
    /// Comma-separated horizons, e.g. "5,10,20,40".
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long = "pilot-reps")]
    pilot_reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Comma-separated tail thresholds, e.g. "0.25,0.5,1".
    #[arg(long = "d-values")]
    d_values: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// Report format: csv | json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated Hurst indices for the kernel-identity checks.
    #[arg(long)]
    h_values: Option<String>,
}

/// Parsed `key = value` configuration file.
#[derive(Debug)]
struct FileConfig {
    entries: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "h",
    "theta0",
    "t_max",
    "horizons",
    "steps",
    "dt",
    "reps",
    "pilot_reps",
    "seed",
    "method",
    "scheme",
    "eps0",
    "kappa",
    "d_values",
    "out_path",
    "format",
    "ks_threshold",
];

impl FileConfig {
    fn empty() -> Self {
        FileConfig {
            entries: BTreeMap::new(),
        }
    }

    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SfouError::config(format!(
                    "{}:{}: expected key = value, got {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(SfouError::config(format!(
                    "{}:{}: unknown key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                SfouError::config(format!("config key {key} = {raw:?} is invalid: {e}"))
            }),
        }
    }
}

fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect();
    values.map_err(|e| SfouError::config(format!("invalid {what} list {raw:?}: {e}")))
}

fn parse_method(raw: &str) -> Result<SubfbmMethod> {
    match raw.replace('_', "-").as_str() {
        "cholesky" => Ok(SubfbmMethod::Cholesky),
        "fbm-fold" => Ok(SubfbmMethod::FbmFold),
        "kernel-wiener" => Ok(SubfbmMethod::KernelWiener),
        other => Err(SfouError::config(format!(
            "unknown method {other:?}; expected cholesky, fbm-fold, or kernel-wiener"
        ))),
    }
}

fn parse_scheme(raw: &str) -> Result<SfouScheme> {
    match raw.replace('_', "-").as_str() {
        "exp-euler" => Ok(SfouScheme::ExpEuler),
        "plain-euler" => Ok(SfouScheme::PlainEuler),
        other => Err(SfouError::config(format!(
            "unknown scheme {other:?}; expected exp-euler or plain-euler"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

fn parse_format(raw: &str) -> Result<OutputFormat> {
    match raw {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(SfouError::config(format!(
            "unknown format {other:?}; expected csv or json"
        ))),
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| SfouError::config(format!("missing required setting {what}")))
}

/// Write through a closure either to a file or to stdout.
fn with_output<F>(out: Option<&Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            write(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let run_all = || match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    match thread_pool_from_env() {
        Ok(Some(pool)) => pool.install(run_all),
        Ok(None) => run_all(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn thread_pool_from_env() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var("SFOU_THREADS") else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|e| SfouError::config(format!("SFOU_THREADS = {raw:?} is invalid: {e}")))?;
    if threads == 0 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| SfouError::config(format!("cannot build thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args).map(|()| 0),
        Command::Estimate(args) => run_estimate(args).map(|()| 0),
        Command::Predict(args) => run_predict(args).map(|()| 0),
        Command::McConsistency(args) => run_mc(args, consistency_experiment),
        Command::McNormality(args) => run_mc(args, normality_experiment),
        Command::McBerryEsseen(args) => run_mc(args, berry_esseen_experiment),
        Command::McTail(args) => run_mc(args, tail_experiment),
        Command::ValidateKernels(args) => run_validate(args),
    }
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let h = require(args.h.or(file.parse("h")?), "h")?;
    let theta = args.theta.or(file.parse("theta0")?);
    let t_max = require(args.t_max.or(file.parse("t_max")?), "t_max")?;
    let steps = require(args.steps.or(file.parse("steps")?), "steps")?;
    let reps = args.reps.or(file.parse("reps")?).unwrap_or(1);
    let seed = args.seed.or(file.parse("seed")?).unwrap_or(0);
    let method = match args.method.as_deref().or(file.get("method")) {
        Some(raw) => parse_method(raw)?,
        None => SubfbmMethod::default(),
    };
    let scheme = match args.scheme.as_deref().or(file.get("scheme")) {
        Some(raw) => parse_scheme(raw)?,
        None => SfouScheme::default(),
    };
    let out = args
        .out
        .or(file.get("out_path").map(PathBuf::from));

    let grid = build_grid(t_max, steps)?;
    let p = derive_constants(h)?;
    let seeds = SeedPolicy::new(seed);
    let batch = match theta {
        Some(theta) => simulate_sfou(&grid, &p, theta, reps, &seeds, scheme)?,
        None => simulate_subfbm(&grid, &p, reps, &seeds, method)?,
    };
    with_output(out.as_deref(), |w| write_paths_csv(w, &batch))?;
    eprintln!(
        "simulated {reps} path(s), n = {steps}, T = {t_max}, seed = {seed}",
    );
    Ok(())
}

fn run_estimate(args: EstimateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let h = require(args.h.or(file.parse("h")?), "h")?;
    let format = match args.format.as_deref().or(file.get("format")) {
        Some(raw) => parse_format(raw)?,
        None => OutputFormat::Json,
    };
    let out = args.out.or(file.get("out_path").map(PathBuf::from));

    let reader = BufReader::new(fs::File::open(&args.input)?);
    let (grid, rows) = read_paths_csv(reader)?;
    for (r, row) in rows.iter().enumerate() {
        if row[0] != 0.0 {
            return Err(SfouError::domain(format!(
                "replicate {r} does not start at 0"
            )));
        }
    }
    let p = derive_constants(h)?;
    let cache = build_cache(&grid, &p, &QuadratureSpec::default())?;
    let results: Vec<EstimateRecord> = rows
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            mle_with_smoothing(row, &cache, args.smooth_j)
                .map(|res| EstimateRecord::from_result(r, &res))
                .map_err(|e| SfouError::Replicate {
                    rep: r,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    with_output(out.as_deref(), |w| match format {
        OutputFormat::Json => write_estimates_json(w, &results),
        OutputFormat::Csv => write_estimates_csv(w, &results),
    })?;
    eprintln!("estimated {} replicate(s) at H = {h}", results.len());
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let h = require(args.h.or(file.parse("h")?), "h")?;
    let t = require(args.t.or(file.parse("t_max")?), "t")?;
    let out = args.out.or(file.get("out_path").map(PathBuf::from));

    let reader = BufReader::new(fs::File::open(&args.input)?);
    let (grid, rows) = read_paths_csv(reader)?;
    let p = derive_constants(h)?;
    let spec = QuadratureSpec::default();
    let records: Vec<PredictionRecord> = rows
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            predict(row, &grid, t, &p, &spec)
                .map(|predicted| PredictionRecord {
                    rep: r,
                    predicted,
                    a: grid.t_max(),
                    t,
                    h,
                })
                .map_err(|e| SfouError::Replicate {
                    rep: r,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    with_output(out.as_deref(), |w| write_predictions_json(w, &records))?;
    eprintln!(
        "predicted {} replicate(s) from a = {} to t = {t}",
        records.len(),
        grid.t_max()
    );
    Ok(())
}

fn resolve_mc_config(args: &McArgs) -> Result<McConfig> {
    let file = FileConfig::load(args.config.as_deref())?;
    let defaults = McConfig::default();
    let horizons = match args.horizons.as_deref().or(file.get("horizons")) {
        Some(raw) => parse_list(raw, "horizons")?,
        None => defaults.horizons.clone(),
    };
    let d_values = match args.d_values.as_deref().or(file.get("d_values")) {
        Some(raw) => parse_list(raw, "d_values")?,
        None => defaults.d_values.clone(),
    };
    let scheme = match args.scheme.as_deref().or(file.get("scheme")) {
        Some(raw) => parse_scheme(raw)?,
        None => defaults.scheme,
    };
    Ok(McConfig {
        h: args.h.or(file.parse("h")?).unwrap_or(defaults.h),
        theta0: args
            .theta0
            .or(file.parse("theta0")?)
            .unwrap_or(defaults.theta0),
        horizons,
        dt: args.dt.or(file.parse("dt")?).unwrap_or(defaults.dt),
        reps: args.reps.or(file.parse("reps")?).unwrap_or(defaults.reps),
        pilot_reps: args
            .pilot_reps
            .or(file.parse("pilot_reps")?)
            .unwrap_or(defaults.pilot_reps),
        seed: args.seed.or(file.parse("seed")?).unwrap_or(defaults.seed),
        eps0: args.eps0.or(file.parse("eps0")?).unwrap_or(defaults.eps0),
        kappa: args
            .kappa
            .or(file.parse("kappa")?)
            .unwrap_or(defaults.kappa),
        d_values,
        ks_threshold: file
            .parse("ks_threshold")?
            .unwrap_or(defaults.ks_threshold),
        scheme,
        quad: QuadratureSpec::default(),
    })
}

fn run_mc<F>(args: McArgs, experiment: F) -> Result<i32>
where
    F: Fn(&McConfig) -> Result<ExperimentReport>,
{
    let format = match args.format.as_deref() {
        Some(raw) => parse_format(raw)?,
        None => OutputFormat::Csv,
    };
    let out = args
        .out
        .clone()
        .or_else(|| {
            FileConfig::load(args.config.as_deref())
                .ok()
                .and_then(|f| f.get("out_path").map(PathBuf::from))
        });
    let cfg = resolve_mc_config(&args)?;
    let report = experiment(&cfg)?;
    with_output(out.as_deref(), |w| match format {
        OutputFormat::Csv => write_report_csv(w, &report),
        OutputFormat::Json => write_report_json(w, &report),
    })?;
    eprintln!(
        "{} experiment: pass = {}, horizons = {:?}, runtime = {:.1}s",
        report.experiment.name(),
        report.pass,
        cfg.horizons,
        report.runtime_seconds
    );
    Ok(if report.pass { 0 } else { 3 })
}

fn run_validate(args: ValidateArgs) -> Result<i32> {
    let file = FileConfig::load(args.config.as_deref())?;
    let h_values = match args.h_values.as_deref().or(file.get("h")) {
        Some(raw) => parse_list(raw, "h_values")?,
        None => vec![0.6, 0.7, 0.85],
    };
    let mut all_ok = true;

    // Representation identity: c_H^2 int n n du reproduces the covariance.
    let spec = QuadratureSpec::default();
    let times = [0.25, 0.5, 1.0];
    for &h in &h_values {
        let p = derive_constants(h)?;
        let err = representation_identity_max_error(&p, &times, &spec)?;
        let ok = err <= 1e-4;
        all_ok &= ok;
        println!(
            "representation identity  H = {h:<5} max |error| = {err:.3e}  {}",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    // Covariance ordering and increment sandwich on a 20 x 20 grid.
    for &h in &[0.2, 0.4, 0.6, 0.75, 0.9] {
        let p = derive_constants(h)?;
        let mut ok = true;
        for i in 1..=20 {
            for j in 1..=20 {
                let s = i as f64 / 10.0;
                let t = j as f64 / 10.0;
                let c = cov_subfbm(s, t, &p)?;
                let r = cov_fbm(s, t, &p);
                ok &= c > 0.0;
                if h > 0.5 {
                    ok &= c < r;
                } else if h < 0.5 {
                    ok &= c > r;
                }
                if s <= t {
                    let v = increment_variance(s, t, &p)?;
                    let lo = p.beta_h() * (t - s).powf(2.0 * h);
                    let hi = (t - s).powf(2.0 * h);
                    if h > 0.5 {
                        ok &= v >= lo - 1e-12 && v <= hi + 1e-12;
                    } else if h < 0.5 {
                        ok &= v >= hi - 1e-12 && v <= lo + 1e-12;
                    }
                }
            }
        }
        all_ok &= ok;
        println!(
            "covariance ordering      H = {h:<5} {}",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    // Constant fixed point of the drift transform.
    for &h in &h_values {
        let p = derive_constants(h)?;
        let mut worst: f64 = 0.0;
        for i in 1..=8 {
            let s = i as f64 / 4.0;
            let v = psi_transform(|_| 2.5, s, &p, &spec)?;
            worst = worst.max((v - 2.5).abs() / 2.5);
        }
        let ok = worst <= 10.0 * spec.rel_tol;
        all_ok &= ok;
        println!(
            "constant fixed point     H = {h:<5} max rel err = {worst:.3e}  {}",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    println!("validate-kernels: {}", if all_ok { "PASS" } else { "FAIL" });
    Ok(if all_ok { 0 } else { 3 })
}
