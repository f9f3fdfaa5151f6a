//! Command-line front end.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::{LabError, LabResult, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK};
use crate::experiments::{run_bounds, run_eigen, run_estimate, run_simulate, run_verify, run_ywfit};
use crate::output::{emit, Format, ReportDyn};
use crate::runner::Runner;
use crate::suites::{run_suite, SuiteName};

#[derive(Debug, Parser)]
#[command(name = "lagcov", version, about = "Lagged covariance operator experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; without it reports go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path of the configured model.
    Simulate,
    /// Lagged covariance estimates for every cell, from one path.
    Estimate,
    /// Bound constants from estimated moments.
    Bounds,
    /// Monte Carlo comparison of estimation errors with the bounds.
    Verify,
    /// Eigenvalue and eigenfunction perturbation inequalities.
    Eigen,
    /// Yule-Walker fits and their error trend.
    Ywfit,
    /// Run a named property suite.
    Suite {
        #[arg(value_enum)]
        name: SuiteName,
    },
}

fn load(cli: &Cli) -> LabResult<Config> {
    let path = cli.config.as_ref().ok_or_else(|| LabError::config("--config is required for this subcommand"))?;
    let mut cfg = Config::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Run and return `(exit code, report)`.
fn dispatch(cli: &Cli) -> LabResult<(i32, Box<dyn ReportDyn>, Option<PathBuf>)> {
    let runner = Runner::with_jobs(cli.jobs);
    if let Command::Suite { name } = cli.command {
        let seed = match &cli.config {
            Some(_) => load(cli)?.seed,
            None => cli.seed.unwrap_or(0),
        };
        let report = run_suite(name, seed, &runner)?;
        for f in report.failures() {
            eprintln!("FAIL {}: {} (value {}, limit {}) {}", name.as_str(), f.name, f.value, f.limit, f.detail);
        }
        let code = if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED };
        return Ok((code, Box::new(report), cli.out.clone()));
    }
    let cfg = load(cli)?;
    let model = cfg.build_model()?;
    let out = cli.out.clone().or_else(|| cfg.experiment.output.clone());
    let (code, report): (i32, Box<dyn ReportDyn>) = match cli.command {
        Command::Simulate => (EXIT_OK, Box::new(run_simulate(&cfg, &model)?)),
        Command::Estimate => (EXIT_OK, Box::new(run_estimate(&cfg, &model)?)),
        Command::Bounds => (EXIT_OK, Box::new(run_bounds(&cfg, &model, &runner)?)),
        Command::Verify => {
            let s = run_verify(&cfg, &model, &runner)?;
            for r in s.rows.iter().filter(|r| !r.pass) {
                eprintln!(
                    "FAIL N={} h={} m={} n={} {}: nmse {} > {} + 3 * {}",
                    r.sample_size, r.lag, r.m, r.n, r.formula, r.nmse, r.bound, r.se
                );
            }
            (if s.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED }, Box::new(s))
        }
        Command::Eigen => {
            let e = run_eigen(&cfg, &model, &runner)?;
            if e.violations > 0 {
                eprintln!("FAIL {} perturbation inequalities violated (min slack {})", e.violations, e.min_slack);
            }
            (if e.violations == 0 { EXIT_OK } else { EXIT_CHECK_FAILED }, Box::new(e))
        }
        Command::Ywfit => {
            let y = run_ywfit(&cfg, &model, &runner)?;
            if y.decreasing == Some(false) {
                eprintln!("FAIL median Yule-Walker error is not decreasing in N: {:?}", y.trend);
            }
            (if y.decreasing == Some(false) { EXIT_CHECK_FAILED } else { EXIT_OK }, Box::new(y))
        }
        Command::Suite { .. } => unreachable!("handled above"),
    };
    Ok((code, report, out))
}

/// Parse arguments, run, write the report; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = dispatch(&cli).and_then(|(code, report, out)| {
        if let Some(path) = emit(report.as_ref(), cli.format, out.as_deref())? {
            eprintln!("wrote {}", path.display());
        }
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_CONFIG
        }
    }
}
