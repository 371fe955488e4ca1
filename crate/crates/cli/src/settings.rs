//! Layered run settings: built-in defaults, then a manifest or config file,
//! then command-line overrides.
//!
//! Config files are line-oriented:
//!
//! ```text
//! # comment
//! n_sigma   = 600
//! theta_min = -13pi      # reals accept a `pi` suffix
//! snapshots = 41, 115
//! ```
//!
//! Keys are case-insensitive; `A` and `B` alias `absorption` and
//! `nonlinearity`. Unknown keys, repeated keys and malformed values are
//! errors that name the key and the line.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use kzk_core::analysis::SolverKind;
use kzk_core::exprk::{Precision, Scheme};
use kzk_core::splitting::DiffractionSum;
use kzk_core::turbulence::TurbulenceParams;
use kzk_core::{CflPolicy, DomainConfig, GridSet, Interval, RunOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Exprk22,
    ExpEuler,
    Splitting,
    SplittingRunning,
}

impl SolverChoice {
    pub fn kind(self) -> SolverKind {
        match self {
            SolverChoice::Exprk22 => SolverKind::Exponential(Scheme::ExpRk22),
            SolverChoice::ExpEuler => SolverKind::Exponential(Scheme::ExpEuler),
            SolverChoice::Splitting => SolverKind::Splitting(DiffractionSum::Direct),
            SolverChoice::SplittingRunning => SolverKind::Splitting(DiffractionSum::Running),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Exprk22 => "exprk22",
            SolverChoice::ExpEuler => "exp-euler",
            SolverChoice::Splitting => "splitting",
            SolverChoice::SplittingRunning => "splitting-running",
        }
    }
}

impl FromStr for SolverChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exprk22" => Ok(SolverChoice::Exprk22),
            "exp-euler" | "expeuler" => Ok(SolverChoice::ExpEuler),
            "splitting" => Ok(SolverChoice::Splitting),
            "splitting-running" => Ok(SolverChoice::SplittingRunning),
            _ => Err(format!(
                "unknown solver `{s}` (expected exprk22, exp-euler, splitting or splitting-running)"
            )),
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionChoice {
    Double,
    Single,
}

impl PrecisionChoice {
    pub fn precision(self) -> Precision {
        match self {
            PrecisionChoice::Double => Precision::Double,
            PrecisionChoice::Single => Precision::Single,
        }
    }
}

impl FromStr for PrecisionChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "double" | "f64" => Ok(PrecisionChoice::Double),
            "single" | "f32" => Ok(PrecisionChoice::Single),
            _ => Err(format!("unknown precision `{s}` (expected double or single)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CflChoice {
    Warn,
    Strict,
}

impl FromStr for CflChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "warn" => Ok(CflChoice::Warn),
            "strict" | "error" => Ok(CflChoice::Strict),
            _ => Err(format!("unknown CFL policy `{s}` (expected warn or strict)")),
        }
    }
}

/// Every tunable of a run. Grid counts left unset come from the preset
/// `set`; explicit counts always win over the preset, whichever layer
/// they come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub set: usize,
    pub n_sigma: Option<usize>,
    pub n_rho: Option<usize>,
    pub n_theta: Option<usize>,
    pub sigma_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub roi_rho_min: f64,
    pub roi_rho_max: f64,
    pub roi_theta_min: f64,
    pub roi_theta_max: f64,
    pub absorption: f64,
    pub nonlinearity: f64,

    pub n_modes: usize,
    pub sigma_u: f64,
    pub c0: f64,
    pub t0: f64,
    /// `None`: `[0.1/L, 9/L]` for the current `t0`, `c0`.
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub seed: u64,

    pub solver: SolverChoice,
    pub precision: PrecisionChoice,
    /// Worker threads; 0 picks the hardware default.
    pub threads: usize,
    /// Steps to take; `None` marches to `sigma_max`.
    pub n_steps: Option<usize>,
    /// Sigma values to record; `None` uses the default cadence.
    pub snapshots: Option<Vec<f64>>,
    pub budget_hours: Option<f64>,
    pub cfl: CflChoice,
    /// Assumed bound on `max |V|` in the a-priori CFL check.
    pub cfl_v_max: f64,
    /// `max |V|` above which a run is declared unstable.
    pub divergence_bound: f64,
    /// Transverse coordinate of exported theta traces.
    pub probe_rho: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let d = DomainConfig::default();
        let t = TurbulenceParams::default();
        let r = RunOptions::default();
        Settings {
            set: 1,
            n_sigma: None,
            n_rho: None,
            n_theta: None,
            sigma_max: d.sigma_max,
            rho_min: d.rho.lo,
            rho_max: d.rho.hi,
            theta_min: d.theta.lo,
            theta_max: d.theta.hi,
            roi_rho_min: d.roi_rho.lo,
            roi_rho_max: d.roi_rho.hi,
            roi_theta_min: d.roi_theta.lo,
            roi_theta_max: d.roi_theta.hi,
            absorption: d.absorption,
            nonlinearity: d.nonlinearity,
            n_modes: t.n_modes,
            sigma_u: t.sigma_u,
            c0: t.c0,
            t0: t.t0,
            k_min: None,
            k_max: None,
            seed: t.seed,
            solver: SolverChoice::Exprk22,
            precision: PrecisionChoice::Double,
            threads: 0,
            n_steps: None,
            snapshots: None,
            budget_hours: None,
            cfl: CflChoice::Warn,
            cfl_v_max: r.cfl_v_max,
            divergence_bound: r.divergence_bound,
            probe_rho: 144.0,
        }
    }
}

/// Recognised keys, canonical spelling.
pub const KEYS: &[&str] = &[
    "set", "n_sigma", "n_rho", "n_theta", "sigma_max", "rho_min", "rho_max", "theta_min",
    "theta_max", "roi_rho_min", "roi_rho_max", "roi_theta_min", "roi_theta_max", "absorption",
    "nonlinearity", "n_modes", "sigma_u", "c0", "t0", "k_min", "k_max", "seed", "solver",
    "precision", "threads", "n_steps", "snapshots", "budget_hours", "cfl", "cfl_v_max",
    "divergence_bound", "probe_rho",
];

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().to_ascii_lowercase();
    let k = match k.as_str() {
        "a" => "absorption",
        "b" => "nonlinearity",
        other => other,
    };
    KEYS.iter().copied().find(|&c| c == k)
}

/// A real number, optionally followed by `pi` (`-13pi`, `15 * pi`, `pi`).
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let value = if let Some(head) = lower.strip_suffix("pi") {
        let head = head.trim_end();
        let head = head.strip_suffix('*').unwrap_or(head).trim();
        let coeff = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| format!("`{t}` is not a number"))?,
        };
        coeff * PI
    } else {
        t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{t}` is not finite"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    let n: usize = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a nonnegative integer", s.trim()))?;
    Ok(n)
}

fn parse_positive_count(s: &str) -> Result<usize, String> {
    match parse_count(s)? {
        0 => Err("must be a positive integer".into()),
        n => Ok(n),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".into())
    }
}

pub fn parse_real_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}

pub fn parse_count_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(parse_positive_count).collect()
}

/// Where an assignment came from, for diagnostics.
#[derive(Debug, Clone)]
pub enum Origin<'a> {
    File { path: &'a Path, line: usize },
    Flag,
}

impl fmt::Display for Origin<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

impl Settings {
    /// Assign one `key = value` pair.
    pub fn assign(&mut self, key: &str, value: &str, origin: &Origin) -> Result<(), CliError> {
        let fail = |reason: String| CliError::Config(format!("{origin}: `{}`: {reason}", key.trim()));
        let Some(canon) = canonical_key(key) else {
            return Err(fail("unknown key".into()));
        };
        let v = value.trim();
        if v.is_empty() {
            return Err(fail("missing value".into()));
        }
        let r: Result<(), String> = (|| {
            match canon {
                "set" => {
                    let s = parse_count(v)?;
                    if GridSet::from_index(s).is_none() {
                        return Err(format!("grid set {s} does not exist (expected 1 to 4)"));
                    }
                    self.set = s;
                }
                "n_sigma" => self.n_sigma = Some(parse_positive_count(v)?),
                "n_rho" => self.n_rho = Some(parse_positive_count(v)?),
                "n_theta" => self.n_theta = Some(parse_positive_count(v)?),
                "sigma_max" => self.sigma_max = parse_positive(v)?,
                "rho_min" => self.rho_min = parse_real(v)?,
                "rho_max" => self.rho_max = parse_real(v)?,
                "theta_min" => self.theta_min = parse_real(v)?,
                "theta_max" => self.theta_max = parse_real(v)?,
                "roi_rho_min" => self.roi_rho_min = parse_real(v)?,
                "roi_rho_max" => self.roi_rho_max = parse_real(v)?,
                "roi_theta_min" => self.roi_theta_min = parse_real(v)?,
                "roi_theta_max" => self.roi_theta_max = parse_real(v)?,
                "absorption" => self.absorption = parse_real(v)?,
                "nonlinearity" => self.nonlinearity = parse_real(v)?,
                "n_modes" => self.n_modes = parse_positive_count(v)?,
                "sigma_u" => self.sigma_u = parse_positive(v)?,
                "c0" => self.c0 = parse_positive(v)?,
                "t0" => self.t0 = parse_positive(v)?,
                "k_min" => self.k_min = Some(parse_positive(v)?),
                "k_max" => self.k_max = Some(parse_positive(v)?),
                "seed" => self.seed = v.parse().map_err(|_| format!("`{v}` is not a 64-bit seed"))?,
                "solver" => self.solver = v.parse()?,
                "precision" => self.precision = v.parse()?,
                "threads" => self.threads = parse_count(v)?,
                "n_steps" => self.n_steps = Some(parse_count(v)?),
                "snapshots" => self.snapshots = Some(parse_real_list(v)?),
                "budget_hours" => self.budget_hours = Some(parse_positive(v)?),
                "cfl" => self.cfl = v.parse()?,
                "cfl_v_max" => self.cfl_v_max = parse_positive(v)?,
                "divergence_bound" => self.divergence_bound = parse_positive(v)?,
                "probe_rho" => self.probe_rho = parse_real(v)?,
                _ => unreachable!("every canonical key is handled"),
            }
            Ok(())
        })();
        r.map_err(fail)
    }

    /// Apply a config file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        self.apply_text(&text, path)
    }

    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::File { path, line: i + 1 };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{origin}: expected `key = value`, found `{line}`")));
            };
            if let Some(canon) = canonical_key(key) {
                if !seen.insert(canon) {
                    return Err(CliError::Config(format!("{origin}: `{}`: key given twice", key.trim())));
                }
            }
            self.assign(key, value, &origin)?;
        }
        Ok(())
    }

    /// Apply `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<(), CliError> {
        for pair in pairs {
            let Some((key, value)) = pair.split_once('=') else {
                return Err(CliError::Config(format!("override `{pair}` is not of the form key=value")));
            };
            self.assign(key, value, &Origin::Flag)?;
        }
        Ok(())
    }

    /// Fill grid counts from the preset so that a manifest is explicit.
    pub fn resolve_counts(&mut self) {
        let (s, r, t) = self.grid_set().counts();
        self.n_sigma.get_or_insert(s);
        self.n_rho.get_or_insert(r);
        self.n_theta.get_or_insert(t);
    }

    pub fn grid_set(&self) -> GridSet {
        GridSet::from_index(self.set).expect("set is validated on assignment")
    }

    pub fn domain(&self) -> Result<DomainConfig, CliError> {
        let (s, r, t) = self.grid_set().counts();
        let config = DomainConfig {
            sigma_max: self.sigma_max,
            rho: Interval::new(self.rho_min, self.rho_max),
            theta: Interval::new(self.theta_min, self.theta_max),
            n_sigma: self.n_sigma.unwrap_or(s),
            n_rho: self.n_rho.unwrap_or(r),
            n_theta: self.n_theta.unwrap_or(t),
            absorption: self.absorption,
            nonlinearity: self.nonlinearity,
            roi_rho: Interval::new(self.roi_rho_min, self.roi_rho_max),
            roi_theta: Interval::new(self.roi_theta_min, self.roi_theta_max),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn turbulence(&self) -> Result<TurbulenceParams, CliError> {
        let mut p = TurbulenceParams {
            n_modes: self.n_modes,
            sigma_u: self.sigma_u,
            c0: self.c0,
            t0: self.t0,
            seed: self.seed,
            ..TurbulenceParams::default()
        }
        .with_default_wavenumbers();
        if let Some(k) = self.k_min {
            p.k_min = k;
        }
        if let Some(k) = self.k_max {
            p.k_max = k;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn budget(&self) -> Option<Duration> {
        self.budget_hours.map(|h| Duration::from_secs_f64(h * 3600.0))
    }

    pub fn cfl_policy(&self) -> CflPolicy {
        match self.cfl {
            CflChoice::Warn => CflPolicy::Warn,
            CflChoice::Strict => CflPolicy::Error,
        }
    }

    /// Run options without snapshot steps.
    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            n_steps: self.n_steps,
            budget: self.budget(),
            divergence_bound: self.divergence_bound,
            cfl_v_max: self.cfl_v_max,
            cfl_policy: self.cfl_policy(),
            ..RunOptions::default()
        }
    }
}
