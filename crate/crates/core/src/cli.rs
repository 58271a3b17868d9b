//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 usage or parse error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::cone_projection::{project_monotone, project_nonneg_monotone};
use crate::exact_formulas::{
    gaussian_lp_projection_norm, harmonic, log_form_risk_bound, nonneg_statistical_dimension,
    sharp_mse_block_bound, statistical_dimension, RiskBoundInput,
};
use crate::experiments::{
    named_suite, run_suite, suite_verdict, write_csv, write_json_lines, SuiteConfig, SuiteOptions,
};
use crate::noise_models::NoiseSpec;
use crate::sequence::RealSequence;
use crate::walk_geometry::{cumulative_sums, greatest_convex_minorant, running_averages};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const FORMULA_NAMES: [&str; 6] = [
    "harmonic",
    "stat-dim",
    "nonneg-stat-dim",
    "gaussian-lp",
    "log-bound",
    "block-bound",
];

#[derive(Debug, Parser)]
#[command(
    name = "monocone",
    version,
    about = "Isotonic projection, exact risk formulas and their verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    /// Isotonic fit of each replicate.
    Slopes,
    /// Order statistics of the running averages of each replicate.
    Averages,
    /// Cumulative sums with their greatest convex minorant.
    Paths,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project each input line onto the monotone cone.
    Project {
        /// Input file, one sequence per line; stdin when omitted or `-`.
        input: Option<PathBuf>,
        /// Project onto the non-negative monotone cone instead.
        #[arg(long)]
        nonneg: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a closed-form quantity, e.g. `formula stat-dim n=100 rho=0`.
    Formula {
        /// One of harmonic, stat-dim, nonneg-stat-dim, gaussian-lp, log-bound, block-bound.
        name: String,
        /// Parameters as key=value.
        params: Vec<String>,
    },
    /// Run a verification suite and write its reports.
    Verify {
        /// Suite name (default, exact-only, gaussian, exchangeable, cts) or a JSON config path.
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, env = "MONOCONE_THREADS")]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock time in each report.
        #[arg(long)]
        timing: bool,
    },
    /// Stream per-replicate quantities as CSV.
    Simulate {
        /// Noise family name, e.g. iid_gaussian.
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        df: Option<f64>,
        /// Comma-separated fixed vector for permutation_of.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        reps: usize,
        #[arg(long, value_enum)]
        emit: Emit,
        #[arg(long, env = "MONOCONE_THREADS")]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying the exit code to report.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::usage(format!("i/o error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Project { input, nonneg, out } => {
            cmd_project(input.as_deref(), nonneg, out.as_deref())
        }
        Command::Formula { name, params } => {
            let value = cmd_formula(&name, &params)?;
            println!("{}", format_formula_value(value));
            Ok(EXIT_OK)
        }
        Command::Verify {
            suite,
            seed,
            reps,
            threads,
            format,
            out,
            timing,
        } => {
            let options = SuiteOptions {
                seed,
                reps,
                record_timing: timing,
            };
            cmd_verify(&suite, &options, threads, format, out.as_deref())
        }
        Command::Simulate {
            family,
            n,
            rho,
            df,
            values,
            seed,
            reps,
            emit,
            threads,
            out,
        } => {
            let mut fragment = format!("family={family} seed={seed}");
            if let Some(n) = n {
                fragment.push_str(&format!(" n={n}"));
            }
            if let Some(rho) = rho {
                fragment.push_str(&format!(" rho={rho}"));
            }
            if let Some(df) = df {
                fragment.push_str(&format!(" df={df}"));
            }
            if let Some(values) = values {
                fragment.push_str(&format!(" values={}", values.replace(' ', "")));
            }
            let spec: NoiseSpec = fragment.parse()?;
            let sink = open_output(out.as_deref())?;
            cmd_simulate(&spec, reps, emit, threads, sink)?;
            Ok(EXIT_OK)
        }
    }
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(File::create(p)?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let threads = match threads {
        Some(0) => return Err(CliError::usage("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot build thread pool: {e}")))
}

/// Splits a line on commas or whitespace; returns the values and the separator
/// to reuse on output.
fn parse_line(line: &str) -> Result<(Vec<f64>, &'static str), String> {
    let (tokens, sep): (Vec<&str>, &'static str) = if line.contains(',') {
        let sep = if line.contains(", ") { ", " } else { "," };
        (line.split(',').map(str::trim).collect(), sep)
    } else {
        (line.split_whitespace().collect(), " ")
    };
    let values = tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("cannot parse `{t}` as a number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((values, sep))
}

fn join_values(values: &[f64], sep: &str) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

pub fn cmd_project(input: Option<&Path>, nonneg: bool, out: Option<&Path>) -> CliResult<i32> {
    let reader: Box<dyn BufRead> = match input {
        Some(p) if p != Path::new("-") => Box::new(BufReader::new(File::open(p)?)),
        _ => {
            let mut buf = String::new();
            io::stdin().read_to_string(&mut buf)?;
            Box::new(io::Cursor::new(buf))
        }
    };
    let mut lines_out = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let number = index + 1;
        if line.trim().is_empty() {
            eprintln!("warning: line {number}: empty line skipped");
            continue;
        }
        let (values, sep) =
            parse_line(&line).map_err(|m| CliError::usage(format!("line {number}: {m}")))?;
        let z = RealSequence::new(values)
            .map_err(|e| CliError::usage(format!("line {number}: {e}")))?;
        let fitted = if nonneg {
            project_nonneg_monotone(&z)
        } else {
            project_monotone(&z).fitted
        };
        lines_out.push(join_values(&fitted, sep));
    }
    let mut sink = open_output(out)?;
    for line in lines_out {
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(EXIT_OK)
}

struct Params<'a> {
    name: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(name: &'a str, raw: &'a [String], allowed: &[&str]) -> CliResult<Self> {
        let mut pairs = Vec::new();
        for item in raw {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::usage(format!("{name}: expected key=value, got `{item}`"))
            })?;
            if !allowed.contains(&k) {
                return Err(CliError::usage(format!(
                    "{name}: unknown parameter `{k}` (expected {})",
                    allowed.join(", ")
                )));
            }
            pairs.push((k, v));
        }
        Ok(Self { name, pairs })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.pairs
            .iter()
            .rev()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> CliResult<T> {
        match self.raw(key) {
            Some(v) => v.parse().map_err(|_| {
                CliError::usage(format!("{}: bad value `{v}` for `{key}`", self.name))
            }),
            None => {
                default.ok_or_else(|| CliError::usage(format!("{}: missing `{key}`", self.name)))
            }
        }
    }

    fn list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| {
                        CliError::usage(format!("{}: bad list `{v}` for `{key}`", self.name))
                    })
            })
            .transpose()
    }
}

/// Evaluates a named formula with `key=value` parameters.
pub fn cmd_formula(name: &str, raw: &[String]) -> CliResult<f64> {
    let value = match name {
        "harmonic" => {
            let p = Params::parse(name, raw, &["n"])?;
            harmonic(p.get("n", None)?)?
        }
        "stat-dim" | "nonneg-stat-dim" => {
            let p = Params::parse(name, raw, &["n", "rho"])?;
            let (n, rho) = (p.get("n", None)?, p.get("rho", Some(0.0))?);
            if name == "stat-dim" {
                statistical_dimension(n, rho)?
            } else {
                nonneg_statistical_dimension(n, rho)?
            }
        }
        "gaussian-lp" => {
            let p = Params::parse(name, raw, &["n", "p"])?;
            gaussian_lp_projection_norm(p.get("n", None)?, p.get("p", None)?)?
        }
        "log-bound" => {
            let p = Params::parse(name, raw, &["k", "n", "sigma"])?;
            log_form_risk_bound(
                p.get("k", None)?,
                p.get("n", None)?,
                p.get("sigma", Some(1.0))?,
            )?
        }
        "block-bound" => {
            let p = Params::parse(name, raw, &["blocks", "theta", "sigma", "rho"])?;
            let sigma = p.get("sigma", Some(1.0))?;
            let rho = p.get("rho", Some(0.0))?;
            let input = match (p.list("theta")?, p.raw("blocks")) {
                (Some(theta), None) => {
                    RiskBoundInput::from_theta_star(RealSequence::new(theta)?, sigma, rho)?
                }
                (None, Some(blocks)) => {
                    let lengths = blocks
                        .split(',')
                        .map(|t| t.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| {
                            CliError::usage(format!("block-bound: bad blocks `{blocks}`"))
                        })?;
                    RiskBoundInput::from_blocks(lengths, sigma, rho)?
                }
                _ => {
                    return Err(CliError::usage(
                        "block-bound: give exactly one of blocks=… or theta=…",
                    ))
                }
            };
            sharp_mse_block_bound(&input)?
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown formula `{other}`; expected one of {}",
                FORMULA_NAMES.join(", ")
            )))
        }
    };
    Ok(value)
}

/// At least 12 significant digits and at least 12 decimals, e.g. `5.187377517640`.
pub fn format_formula_value(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value:.12}");
    }
    let magnitude = value.abs().log10().floor() as i64;
    let decimals = (11 - magnitude).max(12) as usize;
    format!("{value:.decimals$}")
}

fn load_suite(name_or_path: &str) -> CliResult<SuiteConfig> {
    if crate::experiments::SUITE_NAMES.contains(&name_or_path) {
        return Ok(named_suite(name_or_path)?);
    }
    let path = Path::new(name_or_path);
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "unknown suite `{name_or_path}`: not a built-in suite ({}) or a config file",
            crate::experiments::SUITE_NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{name_or_path}: {e}")))
}

pub fn cmd_verify(
    suite: &str,
    options: &SuiteOptions,
    threads: Option<usize>,
    format: ReportFormat,
    out: Option<&Path>,
) -> CliResult<i32> {
    if options.reps == Some(0) {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let config = load_suite(suite)?;
    let pool = thread_pool(threads)?;
    let reports = pool.install(|| run_suite(&config, options))?;

    let mut sink = open_output(out)?;
    match format {
        ReportFormat::Json => {
            write_json_lines(&reports, &mut sink)?;
            if let Some(path) = out.filter(|p| *p != Path::new("-")) {
                let csv_path = path.with_extension("csv");
                write_csv(&reports, BufWriter::new(File::create(csv_path)?))?;
            }
        }
        ReportFormat::Csv => write_csv(&reports, &mut sink)?,
    }
    sink.flush()?;

    let verdict = suite_verdict(&reports);
    eprintln!(
        "suite {suite}: {} exact checks ({} failed), {} statistical checks ({} failed): {}",
        verdict.exact_checks,
        verdict.exact_failures,
        verdict.statistical_checks,
        verdict.statistical_failures,
        if verdict.pass { "PASS" } else { "FAIL" }
    );
    Ok(if verdict.pass {
        EXIT_OK
    } else {
        EXIT_VERIFICATION_FAILED
    })
}

/// Writes CSV rows for `reps` replicates of `spec`:
/// `replicate,k,value` for slopes and averages, `replicate,t,S,C` for paths.
pub fn cmd_simulate<W: Write>(
    spec: &NoiseSpec,
    reps: usize,
    emit: Emit,
    threads: Option<usize>,
    sink: W,
) -> CliResult<()> {
    if reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let pool = thread_pool(threads)?;
    let rows: Vec<Vec<[String; 4]>> = pool.install(|| simulate_rows(spec, reps, emit));

    let io_err = |e: csv::Error| CliError::usage(format!("csv error: {e}"));
    let mut writer = csv::Writer::from_writer(sink);
    if emit == Emit::Paths {
        writer
            .write_record(["replicate", "t", "S", "C"])
            .map_err(io_err)?;
        for row in rows.iter().flatten() {
            writer.write_record(row).map_err(io_err)?;
        }
    } else {
        writer
            .write_record(["replicate", "k", "value"])
            .map_err(io_err)?;
        for row in rows.iter().flatten() {
            writer.write_record(&row[..3]).map_err(io_err)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn simulate_rows(spec: &NoiseSpec, reps: usize, emit: Emit) -> Vec<Vec<[String; 4]>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let z = spec.sample(i);
            let r = i.to_string();
            match emit {
                Emit::Slopes => project_monotone(&z)
                    .fitted
                    .iter()
                    .enumerate()
                    .map(|(k, v)| [r.clone(), (k + 1).to_string(), v.to_string(), String::new()])
                    .collect(),
                Emit::Averages => {
                    let mut averages = running_averages(&z).into_vec();
                    averages.sort_by(f64::total_cmp);
                    averages
                        .iter()
                        .enumerate()
                        .map(|(k, v)| {
                            [r.clone(), (k + 1).to_string(), v.to_string(), String::new()]
                        })
                        .collect()
                }
                Emit::Paths => {
                    let path = cumulative_sums(&z);
                    let minorant = greatest_convex_minorant(&path).values();
                    path.partial_sums()
                        .iter()
                        .zip(&minorant)
                        .enumerate()
                        .map(|(t, (s, c))| [r.clone(), t.to_string(), s.to_string(), c.to_string()])
                        .collect()
                }
            }
        })
        .collect()
}
