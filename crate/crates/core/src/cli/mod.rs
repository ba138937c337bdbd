//! Command-line front end.
//!
//! ```text
//! mapber curves       [--delta D] [--snr-db GRID | --sigma2 GRID]
//! mapber simulate     --seed S [--n N] [--trials T] [--detectors map,bro,mf] ...
//! mapber ao-sample    --seed S [--n N] [--trials T] [--alpha-step A] ...
//! mapber verify-props [--check NAME|all]
//! ```
//!
//! Every command takes `--out PATH`, `--format csv|json` and `--config FILE`.
//! Exit status: 0 success, 1 failed check, 2 usage error, 3 numerical error.

pub mod checks;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::ber_curves;
use crate::error::Error;
use crate::gordon_ao::ao_table;
use crate::mc_sim::{monte_carlo_ber, MonteCarloReport};
use crate::model::ModelParams;

pub use config::{Command, Format, NoisePoint, RunConfig, Settings};
use output::{csv, json, Cell, Sink};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(Error::Parameter(_)) | CliError::Numerical(Error::Budget(_)) => {
                EXIT_USAGE
            }
            CliError::Numerical(_) | CliError::Internal(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mapber",
    version,
    about = "Analytic BER bounds and Monte Carlo detectors for BPSK over Gaussian MIMO channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Analytic curves: matched-filter bound, replica prediction, upper bound.
    Curves(Flags),
    /// Monte Carlo BER of the MAP, box-relaxation and genie detectors.
    Simulate(Flags),
    /// Trial-level auxiliary-objective samples against ell(alpha^2/4).
    AoSample(Flags),
    /// Run the property checks and report PASS/FAIL per check.
    VerifyProps(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Antenna ratio m/n.
    #[arg(long)]
    delta: Option<String>,
    /// Noise variance: value, list a,b,c or grid start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<String>,
    /// SNR in dB: value, list or start:stop:step.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Number of transmit antennas.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated subset of map,bro,mf.
    #[arg(long)]
    detectors: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Check name or `all`.
    #[arg(long)]
    check: Option<String>,
    /// Spacing of the alpha grid for ao-sample.
    #[arg(long = "alpha-step")]
    alpha_step: Option<String>,
}

impl Flags {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        let pairs: [(&str, Option<String>); 11] = [
            ("delta", self.delta.clone()),
            ("sigma2", self.sigma2.clone()),
            ("snr-db", self.snr_db.clone()),
            ("n", self.n.clone()),
            ("trials", self.trials.clone()),
            ("seed", self.seed.clone()),
            ("detectors", self.detectors.clone()),
            (
                "out",
                self.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
            ),
            ("format", self.format.clone()),
            ("check", self.check.clone()),
            ("alpha-step", self.alpha_step.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v);
            }
        }
        s
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (command, flags) = match &cli.command {
        Sub::Curves(f) => (Command::Curves, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::AoSample(f) => (Command::AoSample, f),
        Sub::VerifyProps(f) => (Command::VerifyProps, f),
    };
    let result = (|| {
        let file = match &flags.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let config = RunConfig::from_settings(command, &file.overridden_by(&flags.settings()))?;
        run(&config)
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mapber: {e}");
            e.exit_code()
        }
    }
}

/// Executes a validated configuration. Returns the exit status on success
/// (1 when a requested check failed).
pub fn run(config: &RunConfig) -> Result<i32, CliError> {
    let sink = Sink::open(config.output_path.as_deref())?;
    match config.command {
        Command::Curves => run_curves(config, sink),
        Command::Simulate => run_simulate(config, sink),
        Command::AoSample => run_ao_sample(config, sink),
        Command::VerifyProps => run_verify(config, sink),
    }
}

#[derive(Serialize)]
struct CurvesBody<'a> {
    delta: f64,
    rows: &'a [crate::bounds::CurveRow],
}

fn run_curves(config: &RunConfig, sink: Sink) -> Result<i32, CliError> {
    let grid: Vec<f64> = config.noise.iter().map(|p| p.snr_db).collect();
    let mut rows = ber_curves(config.delta, &grid)?;
    // Keep --sigma2 input exact: recompute rows whose grid point came from a
    // variance rather than a dB value.
    for (row, point) in rows.iter_mut().zip(&config.noise) {
        if crate::model::snr_db_to_sigma2(point.snr_db) != point.sigma2 {
            *row = crate::bounds::curve_row_for(
                ModelParams::new(config.delta, point.sigma2)?,
                point.snr_db,
            );
        }
    }
    let failures: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("snr_db={}: {e}", r.snr_db))
        })
        .collect();
    let text = match config.format {
        Format::Csv => csv(
            &["snr_db", "mfb", "replica", "theta0", "regime"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        Cell::Real(r.snr_db),
                        Cell::Real(r.mfb),
                        Cell::Real(r.replica.unwrap_or(f64::NAN)),
                        Cell::Real(r.theta0.unwrap_or(f64::NAN)),
                        Cell::Text(r.regime.map_or("error".into(), |g| g.to_string())),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Json => json(
            "curves",
            CurvesBody {
                delta: config.delta,
                rows: &rows,
            },
        )?,
    };
    sink.commit(&text)?;
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        for f in &failures {
            eprintln!("mapber: {f}");
        }
        Ok(EXIT_NUMERICAL)
    }
}

#[derive(Serialize)]
struct SimRow<'a> {
    snr_db: f64,
    #[serde(flatten)]
    report: &'a MonteCarloReport,
}

#[derive(Serialize)]
struct SimBody<'a> {
    rows: Vec<SimRow<'a>>,
}

fn run_simulate(config: &RunConfig, sink: Sink) -> Result<i32, CliError> {
    let seed = config
        .seed
        .ok_or_else(|| CliError::Usage("simulate needs --seed".into()))?;
    let mut reports = Vec::new();
    for point in &config.noise {
        let params = ModelParams::new(config.delta, point.sigma2)?;
        for &d in &config.detectors {
            reports.push((
                point.snr_db,
                monte_carlo_ber(d, params, config.n, config.trials, seed)?,
            ));
        }
    }
    for (_, r) in &reports {
        if r.non_converged > 0 {
            eprintln!(
                "mapber: {} of {} {} trials hit the iteration cap",
                r.non_converged, r.trials, r.detector
            );
        }
    }
    let text = match config.format {
        Format::Csv => csv(
            &[
                "snr_db", "detector", "n", "trials", "ber_hat", "ci_lo", "ci_hi",
            ],
            &reports
                .iter()
                .map(|(db, r)| {
                    vec![
                        Cell::Real(*db),
                        Cell::Text(r.detector.to_string()),
                        Cell::Int(r.n as u64),
                        Cell::Int(r.trials),
                        Cell::Real(r.ber_hat),
                        Cell::Real(r.ci95.0),
                        Cell::Real(r.ci95.1),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Json => json(
            "simulate",
            SimBody {
                rows: reports
                    .iter()
                    .map(|(db, r)| SimRow {
                        snr_db: *db,
                        report: r,
                    })
                    .collect(),
            },
        )?,
    };
    sink.commit(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AoBody<'a> {
    delta: f64,
    sigma2: f64,
    n: usize,
    seed: u64,
    rows: &'a [crate::gordon_ao::AoRow],
}

fn run_ao_sample(config: &RunConfig, sink: Sink) -> Result<i32, CliError> {
    let seed = config
        .seed
        .ok_or_else(|| CliError::Usage("ao-sample needs --seed".into()))?;
    let [point] = config.noise[..] else {
        return Err(CliError::Usage(
            "ao-sample takes a single --snr-db or --sigma2 value".into(),
        ));
    };
    let params = ModelParams::new(config.delta, point.sigma2)?;
    let count = (2.0 / config.alpha_step + 1e-9).floor() as usize;
    let alphas: Vec<f64> = (1..=count).map(|i| i as f64 * config.alpha_step).collect();
    let rows = ao_table(params, config.n, config.trials, seed, &alphas)?;
    let text = match config.format {
        Format::Csv => csv(
            &["trial", "alpha", "ao_value", "ell_value"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        Cell::Int(r.trial),
                        Cell::Real(r.alpha),
                        Cell::Real(r.ao_value),
                        Cell::Real(r.ell_value),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Json => json(
            "ao-sample",
            AoBody {
                delta: config.delta,
                sigma2: point.sigma2,
                n: config.n,
                seed,
                rows: &rows,
            },
        )?,
    };
    sink.commit(&text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    checks: &'a [checks::CheckResult],
}

fn run_verify(config: &RunConfig, sink: Sink) -> Result<i32, CliError> {
    let selected: Vec<_> = if config.check.eq_ignore_ascii_case("all") {
        checks::CHECKS.iter().map(|(_, f)| *f).collect()
    } else {
        config
            .check
            .split(',')
            .map(|name| {
                checks::lookup(name.trim()).ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown check {:?}; available: all, {}",
                        name.trim(),
                        checks::names().join(", ")
                    ))
                })
            })
            .collect::<Result<_, _>>()?
    };
    let mut results = Vec::new();
    for f in selected {
        let r = f()?;
        println!("{}", r.line());
        results.push(r);
    }
    let all_pass = results.iter().all(|r| r.pass);
    if config.output_path.is_some() {
        let text = match config.format {
            Format::Csv => csv(
                &["check", "status", "measured", "threshold"],
                &results
                    .iter()
                    .map(|r| {
                        vec![
                            Cell::Text(r.name.to_string()),
                            Cell::Text(if r.pass { "PASS" } else { "FAIL" }.to_string()),
                            Cell::Real(r.measured),
                            Cell::Real(r.threshold),
                        ]
                    })
                    .collect::<Vec<_>>(),
            ),
            Format::Json => json("verify-props", VerifyBody { checks: &results })?,
        };
        sink.commit(&text)?;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}
