//! Experiment settings from a flat `key = value` file and command-line
//! flags. Flags win over file values.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::CliError;

/// Output directory used when neither `--out` nor the config file sets one.
pub const OUT_DIR_ENV: &str = "STEIN_DRIFT_OUT";

/// Settings shared by every subcommand. Every field except `config` and the
/// hidden fault hook can also be set from the config file, under the same
/// name as the flag.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// Noise volatility.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Horizon.
    #[arg(long = "T", id = "T")]
    pub horizon: Option<f64>,
    /// Slope of the linear drift `u_t = alpha t`.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Number of basis coordinates used by the estimator.
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest order in gain curves and surfaces.
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Grid intervals M.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Series truncation N for path rendering.
    #[arg(long)]
    pub terms: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Prior volatility for the Bayes estimator.
    #[arg(long)]
    pub tau: Option<f64>,
    /// minimax, stein, james-stein or bayes.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Surface sweep variable: T or sigma.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long)]
    pub values: Option<String>,
    /// Constant evaluation method: mc or quadrature.
    #[arg(long)]
    pub method: Option<String>,
    /// Gauss–Hermite nodes per axis.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, hide = true)]
    pub fault: Option<String>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: bad value {value:?} for {key}")))
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {line}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            match key.replace('_', "-").as_str() {
                "sigma" => s.sigma = Some(parse(key, value, line)?),
                "T" => s.horizon = Some(parse(key, value, line)?),
                "alpha" => s.alpha = Some(parse(key, value, line)?),
                "n" => s.n = Some(parse(key, value, line)?),
                "n-max" => s.n_max = Some(parse(key, value, line)?),
                "samples" => s.samples = Some(parse(key, value, line)?),
                "grid" => s.grid = Some(parse(key, value, line)?),
                "terms" => s.terms = Some(parse(key, value, line)?),
                "seed" => s.seed = Some(parse(key, value, line)?),
                "out" => s.out = Some(PathBuf::from(value)),
                "workers" => s.workers = Some(parse(key, value, line)?),
                "tau" => s.tau = Some(parse(key, value, line)?),
                "estimator" => s.estimator = Some(value.to_string()),
                "sweep" => s.sweep = Some(value.to_string()),
                "values" => s.values = Some(value.to_string()),
                "method" => s.method = Some(value.to_string()),
                "nodes" => s.nodes = Some(parse(key, value, line)?),
                _ => return Err(CliError::Usage(format!("config line {line}: unknown key {key:?}"))),
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_file(&text)
    }

    /// Fills every unset field from `base`.
    pub fn or(self, base: Settings) -> Settings {
        Settings {
            sigma: self.sigma.or(base.sigma),
            horizon: self.horizon.or(base.horizon),
            alpha: self.alpha.or(base.alpha),
            n: self.n.or(base.n),
            n_max: self.n_max.or(base.n_max),
            samples: self.samples.or(base.samples),
            grid: self.grid.or(base.grid),
            terms: self.terms.or(base.terms),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            config: self.config.or(base.config),
            workers: self.workers.or(base.workers),
            tau: self.tau.or(base.tau),
            estimator: self.estimator.or(base.estimator),
            sweep: self.sweep.or(base.sweep),
            values: self.values.or(base.values),
            method: self.method.or(base.method),
            nodes: self.nodes.or(base.nodes),
            fault: self.fault.or(base.fault),
        }
    }

    /// Flags merged over the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<Settings, CliError> {
        match &self.config {
            Some(path) => {
                let file = Settings::load(path)?;
                Ok(self.or(file))
            }
            None => Ok(self),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    /// Comma-separated sweep values.
    pub fn value_list(&self) -> Result<Option<Vec<f64>>, CliError> {
        let Some(text) = &self.values else {
            return Ok(None);
        };
        let vals = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("bad sweep value {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(vals))
    }
}
