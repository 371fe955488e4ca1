//! Run directories and the reproducibility manifest written into each.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::settings::Settings;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const OUTPUT_ROOT_ENV: &str = "KZK_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "kzk-runs";

/// Everything needed to repeat a run: feeding `settings` back through
/// `--manifest` reproduces the outputs bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub settings: Settings,
    pub seed: u64,
    pub solver: String,
    pub precision: String,
    pub threads: usize,
    pub deterministic: bool,
    pub code_version: String,
    pub started: String,
    pub finished: Option<String>,
    /// `ok` or the failure category.
    pub status: String,
    pub exit_code: u8,
    pub message: Option<String>,
    /// Subcommand-specific arguments.
    pub arguments: serde_json::Value,
    /// Files written, relative to the run directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed manifest {}: {e}", path.display())))
    }
}

/// A single directory that receives every file a command writes.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    /// Use `explicit` if given, else a fresh timestamped directory under
    /// `$KZK_OUTPUT_ROOT` (default `./kzk-runs`).
    pub fn create(explicit: Option<&Path>, command: &str) -> Result<Self, CliError> {
        if let Some(dir) = explicit {
            fs::create_dir_all(dir)?;
            return Ok(RunDir { root: dir.to_path_buf(), files: Vec::new() });
        }
        let base = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
        fs::create_dir_all(&base)?;
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
        for attempt in 0u32.. {
            let name = match attempt {
                0 => format!("{command}-{stamp}"),
                n => format!("{command}-{stamp}-{n}"),
            };
            let dir = base.join(name);
            match fs::create_dir(&dir) {
                Ok(()) => return Ok(RunDir { root: dir, files: Vec::new() }),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
        unreachable!("u32 attempts exhausted")
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path for `name` inside the run directory, recorded as an output.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
