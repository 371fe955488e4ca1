//! `kzk` command-line driver: configuration layering, subcommand dispatch,
//! thread-pool setup and the per-run manifest.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kzk_core::GridSet;
use serde_json::json;

use crate::commands::{BenchArgs, CompareArgs, ConvergeArgs, RunArgs};
use crate::error::{exit, CliError};
use crate::manifest::{RunDir, RunManifest, MANIFEST_FILE};
use crate::settings::{parse_count_list, parse_real_list, Settings, SolverChoice};

#[derive(Debug, Parser)]
#[command(name = "kzk", version, about = "Sonic-boom propagation through a turbulent medium")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Resolution order: built-in
/// defaults, `--manifest`, `--config`, the named flags, then `-p` pairs.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Line-oriented `key = value` configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Reuse the resolved settings of an earlier run.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Grid preset 1 to 4.
    #[arg(long, value_name = "N")]
    pub set: Option<String>,
    /// Absorption coefficient A.
    #[arg(long, value_name = "A")]
    pub absorption: Option<String>,
    /// exprk22, exp-euler, splitting or splitting-running.
    #[arg(long)]
    pub solver: Option<String>,
    /// double or single (exponential solvers only).
    #[arg(long)]
    pub precision: Option<String>,
    /// Worker threads; 0 uses every hardware thread.
    #[arg(long, value_name = "N")]
    pub threads: Option<String>,
    /// Turbulence seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Abort once the elapsed or projected wall time exceeds this.
    #[arg(long, value_name = "HOURS")]
    pub budget_hours: Option<String>,
    /// warn or strict: what to do when the a-priori CFL check fails.
    #[arg(long)]
    pub cfl: Option<String>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Run directory; defaults to a fresh one under $KZK_OUTPUT_ROOT.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Accepted for scripts; every run is already deterministic.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the random medium and write its modes and velocity data.
    GenerateField {
        #[command(flatten)]
        common: Common,
    },
    /// March the N-wave to sigma_max, writing snapshots and step timings.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also export every snapshot as rho,theta,V CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Temporal convergence study against a fine-step reference.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1200)]
        n_ref: usize,
        /// Comma-separated step counts, each a proper divisor of n_ref.
        #[arg(long, default_value = "100,150,200,300")]
        n_list: String,
        /// Measure errors on the region of interest only.
        #[arg(long)]
        roi_only: bool,
    },
    /// Per-step cost across grid presets.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated presets.
        #[arg(long, default_value = "1,2")]
        sets: String,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// Run two solvers and compare them at sigma checkpoints.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Two comma-separated solvers.
        #[arg(long, default_value = "exprk22,splitting")]
        solvers: String,
        /// Comma-separated sigma values.
        #[arg(long, default_value = "41,115")]
        checkpoints: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenerateField { .. } => "generate-field",
            Command::Run { .. } => "run",
            Command::Converge { .. } => "converge",
            Command::Bench { .. } => "bench",
            Command::Compare { .. } => "compare",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::GenerateField { common }
            | Command::Run { common, .. }
            | Command::Converge { common, .. }
            | Command::Bench { common, .. }
            | Command::Compare { common, .. } => common,
        }
    }
}

/// Layer defaults, manifest, config file and flags. `solver` is skipped
/// when the subcommand interprets it itself.
pub fn resolve(common: &Common, take_solver: bool) -> Result<Settings, CliError> {
    let mut s = match &common.manifest {
        Some(path) => RunManifest::load(path)?.settings,
        None => Settings::default(),
    };
    if let Some(path) = &common.config {
        s.apply_file(path)?;
    }
    let solver = if take_solver { common.solver.as_ref() } else { None };
    let named = [
        ("set", common.set.as_ref()),
        ("absorption", common.absorption.as_ref()),
        ("solver", solver),
        ("precision", common.precision.as_ref()),
        ("threads", common.threads.as_ref()),
        ("seed", common.seed.as_ref()),
        ("budget_hours", common.budget_hours.as_ref()),
        ("cfl", common.cfl.as_ref()),
    ];
    let pairs: Vec<String> = named
        .iter()
        .filter_map(|(k, v)| v.map(|v| format!("{k}={v}")))
        .chain(common.params.iter().cloned())
        .collect();
    s.apply_overrides(&pairs)?;
    s.resolve_counts();
    Ok(s)
}

fn solver_list(raw: &str) -> Result<Vec<SolverChoice>, CliError> {
    if raw.eq_ignore_ascii_case("both") {
        return Ok(vec![SolverChoice::Exprk22, SolverChoice::Splitting]);
    }
    raw.split(',')
        .map(|s| s.trim().parse().map_err(|e: String| CliError::Config(format!("`solver`: {e}"))))
        .collect()
}

fn list_error(key: &str) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::Config(format!("`{key}`: {e}"))
}

fn dispatch(command: &Command, settings: &Settings, dir: &mut RunDir) -> Result<serde_json::Value, CliError> {
    match command {
        Command::GenerateField { .. } => commands::generate_field(settings, dir),
        Command::Run { csv, .. } => commands::run(settings, &RunArgs { csv: *csv }, dir),
        Command::Converge { n_ref, n_list, roi_only, .. } => {
            let args = ConvergeArgs {
                n_ref: *n_ref,
                n_list: parse_count_list(n_list).map_err(list_error("n_list"))?,
                roi_only: *roi_only,
            };
            commands::converge(settings, &args, dir)
        }
        Command::Bench { common, sets, steps, repetitions } => {
            let sets = parse_count_list(sets)
                .map_err(list_error("sets"))?
                .into_iter()
                .map(|i| GridSet::from_index(i).ok_or_else(|| CliError::Config(format!("`sets`: no grid set {i}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let solvers = match &common.solver {
                Some(raw) => solver_list(raw)?,
                None => vec![settings.solver],
            };
            let args = BenchArgs { sets, solvers, steps: *steps, repetitions: *repetitions };
            commands::bench(settings, &args, dir)
        }
        Command::Compare { solvers, checkpoints, .. } => {
            let pair = solver_list(solvers)?;
            let [a, b] = pair[..] else {
                return Err(CliError::Config("`solvers`: expected exactly two".into()));
            };
            let args = CompareArgs {
                solvers: [a, b],
                checkpoints: parse_real_list(checkpoints).map_err(list_error("checkpoints"))?,
            };
            commands::compare(settings, &args, dir)
        }
    }
}

fn now() -> String {
    chrono::Local::now().to_rfc3339()
}

/// Parse `args`, run the subcommand and return its exit status.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    let started = now();
    let command = &cli.command;
    let common = command.common();
    let takes_solver = !matches!(command, Command::Bench { .. } | Command::Compare { .. });
    let settings = match resolve(common, takes_solver) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let mut dir = match RunDir::create(common.out.as_deref(), command.name()) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot create run directory: {e}");
            return ExitCode::from(exit::IO);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(settings.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(exit::INTERNAL);
        }
    };
    let threads = pool.current_num_threads();
    eprintln!("run directory: {}", dir.root().display());

    let result = pool.install(|| dispatch(command, &settings, &mut dir));
    let (status, code, message, arguments) = match &result {
        Ok(v) => ("ok".to_string(), exit::OK, None, v.clone()),
        Err(e) => (e.category().to_string(), e.code(), Some(e.to_string()), json!(null)),
    };
    let manifest = RunManifest {
        command: command.name().to_string(),
        seed: settings.seed,
        solver: settings.solver.name().to_string(),
        precision: settings.precision.precision().name().to_string(),
        threads,
        deterministic: true,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: Some(now()),
        status,
        exit_code: code,
        message,
        arguments,
        outputs: dir.files().to_vec(),
        settings,
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(CliError::from)
        .and_then(|text| std::fs::write(dir.root().join(MANIFEST_FILE), text + "\n").map_err(CliError::from));
    if let Err(e) = result {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    if let Err(e) = written {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(exit::IO);
    }
    ExitCode::SUCCESS
}
