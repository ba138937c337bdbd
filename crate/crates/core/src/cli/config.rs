//! Run configuration: command-line flags merged over a flat `key = value`
//! file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::mc_sim::Detector;
use crate::model::snr_db_to_sigma2;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curves,
    Simulate,
    AoSample,
    VerifyProps,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Curves => "curves",
            Command::Simulate => "simulate",
            Command::AoSample => "ao-sample",
            Command::VerifyProps => "verify-props",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// One point of the noise grid. Both forms are kept so that a `--sigma2`
/// value reaches the solvers unrounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePoint {
    pub snr_db: f64,
    pub sigma2: f64,
}

impl NoisePoint {
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            snr_db,
            sigma2: snr_db_to_sigma2(snr_db),
        }
    }

    pub fn from_sigma2(sigma2: f64) -> Self {
        Self {
            snr_db: -10.0 * sigma2.log10(),
            sigma2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub delta: f64,
    pub noise: Vec<NoisePoint>,
    pub n: usize,
    pub trials: u64,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub detectors: Vec<Detector>,
    pub check: String,
    pub alpha_step: f64,
}

/// Raw string settings, from flags or file, before validation.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub const KEYS: &[&str] = &[
    "delta",
    "sigma2",
    "snr-db",
    "n",
    "trials",
    "seed",
    "detectors",
    "out",
    "format",
    "check",
    "alpha-step",
];

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parses a flat config file. Blank lines and lines starting with `#`
    /// are skipped; keys may use `_` or `-`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = normalize_key(k.trim());
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key {:?}",
                    lineno + 1,
                    k.trim()
                )));
            }
            out.values.insert(key, v.trim().to_string());
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `self` with every key of `over` replacing the same key here.
    pub fn overridden_by(mut self, over: &Settings) -> Self {
        for (k, v) in &over.values {
            self.values.insert(k.clone(), v.clone());
        }
        self
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('_', "-")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value for --{key}: {v:?}")))
}

/// `start:stop:step` (inclusive, computed by index), a comma list, or a
/// single value.
pub fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.len() {
        1 => text
            .split(',')
            .map(|s| parse_num::<f64>(key, s))
            .collect::<Result<Vec<_>, _>>()?,
        3 => {
            let start: f64 = parse_num(key, parts[0])?;
            let stop: f64 = parse_num(key, parts[1])?;
            let step: f64 = parse_num(key, parts[2])?;
            if !(step > 0.0) || !(stop >= start) {
                return Err(CliError::Usage(format!(
                    "--{key} {text:?}: need step > 0 and stop >= start"
                )));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            if count > 1_000_000 {
                return Err(CliError::Usage(format!("--{key} {text:?}: grid too large")));
            }
            (0..=count).map(|i| start + i as f64 * step).collect()
        }
        _ => {
            return Err(CliError::Usage(format!(
                "--{key} {text:?}: expected start:stop:step"
            )))
        }
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!(
            "--{key} {text:?}: non-finite value"
        )));
    }
    Ok(values)
}

impl RunConfig {
    pub fn from_settings(command: Command, s: &Settings) -> Result<Self, CliError> {
        let (default_n, default_trials) = match command {
            Command::AoSample => (4000, 100),
            _ => (16, 1000),
        };
        let delta = match s.get("delta") {
            Some(v) => parse_num("delta", v)?,
            None => 1.0,
        };
        if !(delta > 0.0 && f64::is_finite(delta)) {
            return Err(CliError::Usage(format!(
                "--delta must be positive, got {delta}"
            )));
        }
        let noise = match (s.get("sigma2"), s.get("snr-db")) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give either --sigma2 or --snr-db, not both".into(),
                ))
            }
            (Some(v), None) => {
                let grid = parse_grid("sigma2", v)?;
                if grid.iter().any(|&x| x <= 0.0) {
                    return Err(CliError::Usage("--sigma2 values must be positive".into()));
                }
                grid.into_iter().map(NoisePoint::from_sigma2).collect()
            }
            (None, Some(v)) => parse_grid("snr-db", v)?
                .into_iter()
                .map(NoisePoint::from_snr_db)
                .collect(),
            (None, None) => match command {
                Command::Curves => parse_grid("snr-db", "0:16:0.25")?
                    .into_iter()
                    .map(NoisePoint::from_snr_db)
                    .collect(),
                _ => vec![NoisePoint::from_snr_db(10.0)],
            },
        };
        let n = match s.get("n") {
            Some(v) => parse_num("n", v)?,
            None => default_n,
        };
        if n == 0 {
            return Err(CliError::Usage("--n must be positive".into()));
        }
        let trials = match s.get("trials") {
            Some(v) => parse_num("trials", v)?,
            None => default_trials,
        };
        if trials == 0 {
            return Err(CliError::Usage("--trials must be positive".into()));
        }
        let seed = s.get("seed").map(|v| parse_num("seed", v)).transpose()?;
        if matches!(command, Command::Simulate | Command::AoSample) && seed.is_none() {
            return Err(CliError::Usage(format!(
                "{} is randomized and needs an explicit --seed",
                command.as_str()
            )));
        }
        let format = match s.get("format").map(|f| f.trim().to_ascii_lowercase()) {
            None => Format::Csv,
            Some(f) if f == "csv" => Format::Csv,
            Some(f) if f == "json" => Format::Json,
            Some(f) => return Err(CliError::Usage(format!("unknown --format {f:?}"))),
        };
        let detectors = s
            .get("detectors")
            .unwrap_or("map,bro,mf")
            .split(',')
            .map(|d| {
                d.parse::<Detector>()
                    .map_err(|e| CliError::Usage(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let alpha_step = match s.get("alpha-step") {
            Some(v) => parse_num("alpha-step", v)?,
            None => 0.05,
        };
        if !(alpha_step > 0.0 && alpha_step <= 2.0) {
            return Err(CliError::Usage(format!(
                "--alpha-step must be in (0, 2], got {alpha_step}"
            )));
        }
        Ok(Self {
            command,
            delta,
            noise,
            n,
            trials,
            seed,
            output_path: s.get("out").map(PathBuf::from),
            format,
            detectors,
            check: s.get("check").unwrap_or("all").to_string(),
            alpha_step,
        })
    }
}
