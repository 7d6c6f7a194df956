//! Command-line front end.
//!
//! `parse_args` turns argv into a validated [`RunConfig`]; `run` executes it
//! and writes the report. Output depends only on the configuration and the
//! seed, never on wall-clock time or thread scheduling.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::estimators::Estimator;
use crate::evaluate::{
    compare_theory_exact_with, inclusive_grid, rho_sweep_t4, Arrangement, PopulationSpec,
};
use crate::population::{interval_k, moments_from_summary, Population, SummaryStats};
use crate::theory::{mse_t4_min, pre_table, RowStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Theory,
    Evaluate,
    Sweep,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "syssamp",
    version,
    about = "Estimators of the mean under systematic sampling with an auxiliary variable"
)]
struct Args {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Population file (header `y,x`)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sample size n
    #[arg(long = "n")]
    n: Option<usize>,
    /// Population size N
    #[arg(long = "N")]
    population_size: Option<usize>,
    /// Comma-separated subset of t0,t1,t2,t3,t4
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<Estimator>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Common intraclass correlation rho_wy = rho_wx
    #[arg(long = "rho-w", allow_negative_numbers = true)]
    rho_w: Option<f64>,
    /// Sweep grid `lo:hi:step`
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Shift constant in the t4 transformation (default: N)
    #[arg(long = "cap-n")]
    cap_n: Option<usize>,
    #[arg(long = "mean-y", allow_negative_numbers = true)]
    mean_y: Option<f64>,
    #[arg(long = "mean-x", allow_negative_numbers = true)]
    mean_x: Option<f64>,
    #[arg(long = "s2-y")]
    s2_y: Option<f64>,
    #[arg(long = "s2-x")]
    s2_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Coefficient of variation of y (generate)
    #[arg(long = "cv-y")]
    cv_y: Option<f64>,
    /// Coefficient of variation of x (generate)
    #[arg(long = "cv-x")]
    cv_x: Option<f64>,
    /// shuffled, sorted_by_x or periodic (generate)
    #[arg(long, default_value = "shuffled")]
    arrangement: Arrangement,
    /// Write the generated population here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

/// What to run, with every mode-specific input resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Theory { summary: SummaryStats },
    Evaluate { input: PathBuf, n: usize },
    Sweep { summary: SummaryStats, grid: Vec<f64> },
    Generate { spec: PopulationSpec, output: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub job: Job,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    pub cap_n: Option<usize>,
    pub format: Format,
}

impl RunConfig {
    pub fn mode(&self) -> Mode {
        match self.job {
            Job::Theory { .. } => Mode::Theory,
            Job::Evaluate { .. } => Mode::Evaluate,
            Job::Sweep { .. } => Mode::Sweep,
            Job::Generate { .. } => Mode::Generate,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    /// 0 for help/version, 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Clap(_) | CliError::Usage(_) => 2,
            CliError::Run(e) if e.is_numerical() => 4,
            CliError::Run(_) => 3,
        }
    }
}

fn require<T>(value: Option<T>, flag: &str, mode: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--mode {mode} requires {flag}")))
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Usage(format!("--grid expects lo:hi:step, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    inclusive_grid(nums[0], nums[1], nums[2]).map_err(|e| CliError::Usage(e.to_string()))
}

fn summary_from(args: &Args, mode: &str, rho_w: f64) -> Result<SummaryStats, CliError> {
    Ok(SummaryStats {
        population_size: require(args.population_size, "--N", mode)?,
        n: require(args.n, "--n", mode)?,
        mean_y: require(args.mean_y, "--mean-y", mode)?,
        mean_x: require(args.mean_x, "--mean-x", mode)?,
        s2_y: require(args.s2_y, "--s2-y", mode)?,
        s2_x: require(args.s2_x, "--s2-x", mode)?,
        rho: require(args.rho, "--rho", mode)?,
        rho_wy: rho_w,
        rho_wx: rho_w,
    })
}

/// Parses argv (including the program name) into a [`RunConfig`].
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    if args.n == Some(0) {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let job = match args.mode {
        Mode::Theory => {
            let rho_w = require(args.rho_w, "--rho-w", "theory")?;
            Job::Theory { summary: summary_from(&args, "theory", rho_w)? }
        }
        Mode::Evaluate => Job::Evaluate {
            input: require(args.input.clone(), "--input", "evaluate")?,
            n: require(args.n, "--n", "evaluate")?,
        },
        Mode::Sweep => {
            let grid = parse_grid(&require(args.grid.clone(), "--grid", "sweep")?)?;
            Job::Sweep { summary: summary_from(&args, "sweep", 0.0)?, grid }
        }
        Mode::Generate => {
            let mut spec = PopulationSpec::new(
                require(args.population_size, "--N", "generate")?,
                require(args.n, "--n", "generate")?,
                require(args.rho, "--rho", "generate")?,
                require(args.cv_y, "--cv-y", "generate")?,
                require(args.cv_x, "--cv-x", "generate")?,
                args.arrangement,
            );
            if let Some(m) = args.mean_y {
                spec.mean_y = m;
            }
            if let Some(m) = args.mean_x {
                spec.mean_x = m;
            }
            Job::Generate { spec, output: args.output.clone() }
        }
    };
    let mut estimators = args.estimators.unwrap_or_else(|| Estimator::ALL.to_vec());
    estimators.sort();
    estimators.dedup();
    Ok(RunConfig {
        job,
        estimators,
        seed: args.seed,
        cap_n: args.cap_n,
        format: args.format,
    })
}

fn status_word(status: RowStatus) -> &'static str {
    match status {
        RowStatus::Valid => "ok",
        RowStatus::Exact => "exact",
        RowStatus::Invalid => "invalid",
    }
}

fn fixed2(v: f64) -> String {
    fixed(v, 2)
}

fn fixed(v: f64, digits: usize) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.digits$}")
    }
}

/// Executes `config`, writing the report to `out`.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match &config.job {
        Job::Theory { summary } => theory_report(config, summary)?,
        Job::Evaluate { input, n } => evaluate_report(config, input, *n)?,
        Job::Sweep { summary, grid } => sweep_report(config, summary, grid)?,
        Job::Generate { spec, output } => {
            let pop = spec.generate(config.seed)?;
            let mut buf = Vec::new();
            pop.write_csv(&mut buf)?;
            match output {
                Some(path) => {
                    std::fs::write(path, &buf)
                        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    format!("wrote {} units to {}\n", pop.size(), path.display())
                }
                None => String::from_utf8(buf).expect("csv output is utf-8"),
            }
        }
    };
    out.write_all(text.as_bytes()).map_err(Error::from)?;
    Ok(())
}

fn theory_report(config: &RunConfig, s: &SummaryStats) -> Result<String, CliError> {
    let m = moments_from_summary(s)?;
    let cap_n = config.cap_n.unwrap_or(s.population_size);
    let rows = pre_table(&m, s.mean_y, s.mean_x, cap_n)?;
    let (tc, _) = mse_t4_min(&m, s.mean_y, s.mean_x, cap_n)?;
    let rows: Vec<_> = rows
        .into_iter()
        .filter(|r| config.estimators.contains(&r.estimator))
        .collect();
    let mut o = String::new();
    match config.format {
        Format::Table => {
            writeln!(
                o,
                "PRE vs t0 (N = {}, n = {}, rho_w = {}, cap_n = {cap_n})",
                s.population_size, s.n, s.rho_wy
            )
            .unwrap();
            writeln!(o, "{:<10}{:>16}{:>14}{:>12}  status", "estimator", "mse", "bias", "PRE").unwrap();
            for r in &rows {
                writeln!(
                    o,
                    "{:<10}{:>16}{:>14}{:>12}  {}",
                    r.estimator.label(),
                    fixed2(r.variance_or_mse),
                    fixed2(r.bias),
                    fixed2(r.pre),
                    status_word(r.status)
                )
                .unwrap();
            }
            if config.estimators.contains(&Estimator::Transformed) {
                writeln!(o, "t4 constants: k1 = {:.6}, k2 = {:.6}", tc.k1, tc.k2).unwrap();
            }
        }
        Format::Csv => {
            writeln!(o, "estimator,variance_or_mse,bias,pre,status").unwrap();
            for r in &rows {
                writeln!(
                    o,
                    "{},{},{},{},{}",
                    r.estimator,
                    r.variance_or_mse,
                    r.bias,
                    r.pre,
                    status_word(r.status)
                )
                .unwrap();
            }
        }
        Format::Json => {
            let doc = json!({
                "mode": "theory",
                "summary": s,
                "cap_n": cap_n,
                "moments": m,
                "constants": tc,
                "rows": rows,
            });
            writeln!(o, "{}", serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        }
    }
    Ok(o)
}

fn evaluate_report(config: &RunConfig, input: &PathBuf, n: usize) -> Result<String, CliError> {
    let pop = Population::read_path(input)?;
    let k = interval_k(pop.size(), n)?;
    let cap_n = config.cap_n.unwrap_or(pop.size());
    let rows = compare_theory_exact_with(&pop, n, &config.estimators, cap_n)?;
    let mut o = String::new();
    match config.format {
        Format::Table => {
            writeln!(o, "theory vs exact enumeration (N = {}, n = {n}, k = {k}, cap_n = {cap_n})", pop.size()).unwrap();
            writeln!(
                o,
                "{:<10}{:>14}{:>14}{:>10}{:>14}{:>14}{:>10}",
                "estimator", "theory_mse", "exact_mse", "rel_err", "theory_bias", "exact_bias", "rel_err"
            )
            .unwrap();
            for r in &rows {
                let (tb, eb, be) = match r.bias {
                    Some(b) => (fixed2(b.theory), fixed2(b.exact), fixed(b.rel_error, 4)),
                    None => ("-".into(), "-".into(), "-".into()),
                };
                writeln!(
                    o,
                    "{:<10}{:>14}{:>14}{:>10}{:>14}{:>14}{:>10}",
                    r.estimator.label(),
                    fixed2(r.mse.theory),
                    fixed2(r.mse.exact),
                    fixed(r.mse.rel_error, 4),
                    tb,
                    eb,
                    be
                )
                .unwrap();
            }
        }
        Format::Csv => {
            writeln!(o, "estimator,theory_mse,exact_mse,mse_rel_error,theory_bias,exact_bias,bias_rel_error").unwrap();
            for r in &rows {
                let bias = r
                    .bias
                    .map(|b| format!("{},{},{}", b.theory, b.exact, b.rel_error))
                    .unwrap_or_else(|| ",,".into());
                writeln!(o, "{},{},{},{},{}", r.estimator, r.mse.theory, r.mse.exact, r.mse.rel_error, bias).unwrap();
            }
        }
        Format::Json => {
            let doc = json!({
                "mode": "evaluate",
                "population_size": pop.size(),
                "n": n,
                "interval_k": k,
                "cap_n": cap_n,
                "rows": rows,
            });
            writeln!(o, "{}", serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        }
    }
    Ok(o)
}

fn sweep_report(config: &RunConfig, s: &SummaryStats, grid: &[f64]) -> Result<String, CliError> {
    let cap_n = config.cap_n.unwrap_or(s.population_size);
    let result = rho_sweep_t4(s, grid, cap_n)?;
    let mut o = String::new();
    match config.format {
        Format::Table => {
            writeln!(o, "{:>10}{:>12}", "rho_w", "PRE(t4)").unwrap();
            for r in &result.rows {
                let pre = r.pre_t4.map(fixed2).unwrap_or_else(|| "-".into());
                writeln!(o, "{:>10.4}{:>12}", r.rho_w, pre).unwrap();
            }
            match result.best_row() {
                Some(b) => writeln!(
                    o,
                    "best match: rho_w = {:.4}, PRE(t4) = {} (target {})",
                    b.rho_w,
                    fixed2(b.pre_t4.unwrap_or(f64::NAN)),
                    fixed2(result.target)
                )
                .unwrap(),
                None => writeln!(o, "best match: none (no valid t4 optimum on the grid)").unwrap(),
            }
        }
        Format::Csv => {
            writeln!(o, "rho_w,pre_t4").unwrap();
            for r in &result.rows {
                let pre = r.pre_t4.map(|p| p.to_string()).unwrap_or_default();
                writeln!(o, "{},{pre}", r.rho_w).unwrap();
            }
        }
        Format::Json => {
            let doc = json!({
                "mode": "sweep",
                "cap_n": cap_n,
                "target": result.target,
                "best": result.best_row(),
                "rows": result.rows,
            });
            writeln!(o, "{}", serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        }
    }
    Ok(o)
}
