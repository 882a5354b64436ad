//! Effective run configuration: CLI flags override the optional flat
//! `key=value` config file, which overrides built-in defaults. The effective
//! configuration (every field, defaulted or not) is echoed as `#`-prefixed
//! lines into every output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::CliError;

/// Optional values shared by every subcommand; `None` means "not given on
/// the command line".
#[derive(Debug, Clone, Default, Args)]
pub struct CommonOpts {
    /// Qudit dimension d (>= 2)
    #[arg(long)]
    pub d: Option<u32>,
    /// Depolarizing noise level x in [0, 1]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fraction of signals used for sampling, in (0, 1/2)
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Security parameter epsilon in (0, 1)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Smoothing split exponent beta in (0, 1/2)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Security parameter fed to the ell_2 deviation term
    #[arg(long = "eps-prime-l2")]
    pub eps_prime_l2: Option<f64>,
    /// First N of the sweep range
    #[arg(long = "n-start")]
    pub n_start: Option<u64>,
    /// Last N of the sweep range
    #[arg(long = "n-stop")]
    pub n_stop: Option<u64>,
    /// Number of sweep points
    #[arg(long)]
    pub points: Option<u32>,
    /// Log-spaced sweep (true) or linear (false)
    #[arg(long, value_parser = clap::value_parser!(bool))]
    pub log: Option<bool>,
    /// Explicit comma-separated N list; overrides the range
    #[arg(long = "n-list", value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
    /// Monte Carlo trials per cell
    #[arg(long)]
    pub trials: Option<u64>,
    /// RNG seed (always echoed in outputs)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = machine parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Fix the scanned weight class instead of searching for the worst
    #[arg(long)]
    pub weight: Option<u64>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value config file, lower precedence than flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: u32,
    pub noise: f64,
    pub fraction: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub eps_prime_l2: f64,
    pub n_start: u64,
    pub n_stop: u64,
    pub points: u32,
    pub log: bool,
    pub n_list: Option<Vec<u64>>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub weight: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 4,
            noise: 0.02,
            fraction: 0.07,
            epsilon: 1e-36,
            beta: 1.0 / 3.0,
            eps_prime_l2: 4e-12,
            n_start: 1_000,
            n_stop: 100_000_000,
            points: 60,
            log: true,
            n_list: None,
            trials: 100_000,
            seed: 1,
            workers: 0,
            weight: None,
            out: None,
        }
    }
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| CliError::Config(format!("config field `{key}`: cannot parse `{value}`")))
}

/// Parses the flat `key=value` file format ('#' starts a comment line).
fn parse_config_file(path: &Path) -> Result<CommonOpts, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config field `config`: cannot read {path:?}: {e}")))?;
    let mut opts = CommonOpts::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "config field `config`: line {} is not key=value: `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim();
        match key {
            "d" => opts.d = Some(parse_field(key, value)?),
            "noise" => opts.noise = Some(parse_field(key, value)?),
            "fraction" => opts.fraction = Some(parse_field(key, value)?),
            "epsilon" => opts.epsilon = Some(parse_field(key, value)?),
            "beta" => opts.beta = Some(parse_field(key, value)?),
            "eps-prime-l2" => opts.eps_prime_l2 = Some(parse_field(key, value)?),
            "n-start" => opts.n_start = Some(parse_field(key, value)?),
            "n-stop" => opts.n_stop = Some(parse_field(key, value)?),
            "points" => opts.points = Some(parse_field(key, value)?),
            "log" => opts.log = Some(parse_field(key, value)?),
            "n-list" => {
                let list: Result<Vec<u64>, CliError> = value
                    .split(',')
                    .map(|v| parse_field::<u64>(key, v))
                    .collect();
                opts.n_list = Some(list?);
            }
            "trials" => opts.trials = Some(parse_field(key, value)?),
            "seed" => opts.seed = Some(parse_field(key, value)?),
            "workers" => opts.workers = Some(parse_field(key, value)?),
            "weight" => opts.weight = Some(parse_field(key, value)?),
            "out" => opts.out = Some(PathBuf::from(value.trim())),
            other => {
                return Err(CliError::Config(format!(
                    "config field `{other}`: unknown key (line {})",
                    lineno + 1
                )))
            }
        }
    }
    Ok(opts)
}

macro_rules! take {
    ($cli:expr, $file:expr, $default:expr, $field:ident) => {
        $cli.$field
            .clone()
            .or($file.$field.clone())
            .unwrap_or($default.$field)
    };
}

impl RunConfig {
    /// CLI flags > config file > defaults.
    pub fn resolve(cli: &CommonOpts) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => parse_config_file(path)?,
            None => CommonOpts::default(),
        };
        let default = RunConfig::default();
        let cfg = Self {
            d: take!(cli, file, default, d),
            noise: take!(cli, file, default, noise),
            fraction: take!(cli, file, default, fraction),
            epsilon: take!(cli, file, default, epsilon),
            beta: take!(cli, file, default, beta),
            eps_prime_l2: take!(cli, file, default, eps_prime_l2),
            n_start: take!(cli, file, default, n_start),
            n_stop: take!(cli, file, default, n_stop),
            points: take!(cli, file, default, points),
            log: take!(cli, file, default, log),
            n_list: cli.n_list.clone().or(file.n_list),
            trials: take!(cli, file, default, trials),
            seed: take!(cli, file, default, seed),
            workers: take!(cli, file, default, workers),
            weight: cli.weight.or(file.weight),
            out: cli.out.clone().or(file.out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let err = |field: &str, detail: String| {
            Err(CliError::Config(format!("config field `{field}`: {detail}")))
        };
        if self.d < 2 {
            return err("d", format!("{} is below 2", self.d));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return err("noise", format!("{} outside [0, 1]", self.noise));
        }
        if !(self.fraction > 0.0 && self.fraction < 0.5) {
            return err("fraction", format!("{} outside (0, 1/2)", self.fraction));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return err("epsilon", format!("{} outside (0, 1)", self.epsilon));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return err("beta", format!("{} outside (0, 1/2)", self.beta));
        }
        if !(self.eps_prime_l2 > 0.0 && self.eps_prime_l2 < 1.0) {
            return err("eps-prime-l2", format!("{} outside (0, 1)", self.eps_prime_l2));
        }
        if self.n_start == 0 || self.n_stop < self.n_start {
            return err(
                "n-start",
                format!("range [{}, {}] is empty", self.n_start, self.n_stop),
            );
        }
        if self.points == 0 {
            return err("points", "must be at least 1".into());
        }
        if let Some(list) = &self.n_list {
            if list.is_empty() {
                return err("n-list", "must not be empty".into());
            }
        }
        Ok(())
    }

    /// The sweep N values: the explicit list, or the (log-)spaced range.
    pub fn sweep_points(&self) -> Vec<u64> {
        if let Some(list) = &self.n_list {
            return list.clone();
        }
        let p = self.points as usize;
        if p == 1 || self.n_start == self.n_stop {
            return vec![self.n_start];
        }
        let (a, b) = (self.n_start as f64, self.n_stop as f64);
        let mut out: Vec<u64> = (0..p)
            .map(|i| {
                let t = i as f64 / (p - 1) as f64;
                let v = if self.log {
                    (a.ln() + t * (b.ln() - a.ln())).exp()
                } else {
                    a + t * (b - a)
                };
                v.round() as u64
            })
            .collect();
        out.dedup();
        out
    }

    /// `#`-prefixed echo of every effective field, fixed order.
    pub fn echo(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# minent {command}");
        let _ = writeln!(s, "# d={}", self.d);
        let _ = writeln!(s, "# noise={}", fmt_cfg(self.noise));
        let _ = writeln!(s, "# fraction={}", fmt_cfg(self.fraction));
        let _ = writeln!(s, "# epsilon={}", fmt_cfg(self.epsilon));
        let _ = writeln!(s, "# beta={}", fmt_cfg(self.beta));
        let _ = writeln!(s, "# eps-prime-l2={}", fmt_cfg(self.eps_prime_l2));
        let _ = writeln!(s, "# n-start={}", self.n_start);
        let _ = writeln!(s, "# n-stop={}", self.n_stop);
        let _ = writeln!(s, "# points={}", self.points);
        let _ = writeln!(s, "# log={}", self.log);
        let _ = writeln!(
            s,
            "# n-list={}",
            self.n_list
                .as_ref()
                .map(|l| l.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","))
                .unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(s, "# trials={}", self.trials);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# workers={}", self.workers);
        let _ = writeln!(
            s,
            "# weight={}",
            self.weight.map(|w| w.to_string()).unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(
            s,
            "# out={}",
            self.out
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "stdout".into())
        );
        s
    }
}

/// 12 significant digits, scientific notation; byte-stable across runs.
pub fn fmt_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Config echo formatting: shortest round-trip decimal in a readable range,
/// scientific notation outside it.
pub fn fmt_cfg(x: f64) -> String {
    if x == 0.0 || (x.abs() >= 1e-3 && x.abs() < 1e6) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(&CommonOpts::default()).unwrap();
        assert_eq!(cfg.d, 4);
        assert_eq!(cfg.points, 60);
        assert!(cfg.log);
    }

    #[test]
    fn sweep_points_log_spaced() {
        let mut cfg = RunConfig {
            n_start: 1000,
            n_stop: 100_000,
            points: 3,
            ..RunConfig::default()
        };
        let pts = cfg.sweep_points();
        assert_eq!(pts, vec![1000, 10_000, 100_000]);
        cfg.log = false;
        assert_eq!(cfg.sweep_points(), vec![1000, 50_500, 100_000]);
        cfg.n_list = Some(vec![7, 8]);
        assert_eq!(cfg.sweep_points(), vec![7, 8]);
    }

    #[test]
    fn validation_names_the_field() {
        let cli = CommonOpts {
            fraction: Some(0.7),
            ..CommonOpts::default()
        };
        match RunConfig::resolve(&cli) {
            Err(CliError::Config(msg)) => assert!(msg.contains("`fraction`"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(1.6023348065544264), "1.60233480655e0");
        assert_eq!(fmt_sig12(0.0), "0.00000000000e0");
    }
}
