//! Batch runner around `rwre-core`.
//!
//! A run reads one JSON configuration with sections `model`, `run`, `event`,
//! `ladder` and `output`, writes its results to the output directory and
//! finishes with a `manifest.json` that echoes the configuration and lists a
//! SHA-256 digest for every file. Feeding a manifest back as the
//! configuration reproduces the same bytes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 property failure,
//! 4 budget exceeded.

mod commands;
mod config;
mod error;
mod manifest;
mod oracle;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{default_nu_grid, Config, CrossingConfig, EventConfig, EventName, Ladder, OutputConfig, Overrides, RunConfig};
pub use error::CliError;
pub use manifest::{sha256_hex, OutputDigest, OutputSet, RunManifest, RunStatus, StreamAllocation, MANIFEST_FILE, MANIFEST_VERSION};
pub use oracle::{random_chain, OracleReport};

pub const TOOL: &str = "rwre-lab";
pub const DEFAULT_OUT_DIR: &str = "rwre-lab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EnvCheck,
    Valleys,
    Simulate,
    Estimate,
    ExponentCurve,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::EnvCheck => "env-check",
            Command::Valleys => "valleys",
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::ExponentCurve => "exponent-curve",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// What a command reports back besides its files.
#[derive(Debug, Default)]
pub(crate) struct Report {
    pub streams: Vec<StreamAllocation>,
    pub replicas: Option<u64>,
    pub notes: Vec<String>,
    pub partial: bool,
    /// Raised after the outputs and the manifest are written.
    pub failure: Option<CliError>,
}

/// Output directory a configuration writes to.
pub fn output_dir(config: &Config) -> PathBuf {
    config.output.dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Run `command` and write its outputs and manifest.
///
/// Failures detected after the outputs are complete (a failed property, an
/// exhausted budget) still leave a manifest behind and are returned as the
/// error.
pub fn execute(command: Command, config: &Config) -> Result<RunManifest, CliError> {
    let threads = config.run.threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("run.threads: {e}")))?;
    let mut out = OutputSet::create(&output_dir(config))?;
    let started = Instant::now();
    let mut report = pool.install(|| commands::dispatch(command, config, &mut out))?;
    let wall = started.elapsed().as_secs_f64();

    let status = match (&report.failure, report.partial) {
        (_, true) => RunStatus::Partial,
        (Some(_), false) => RunStatus::Failed,
        (None, false) => RunStatus::Complete,
    };
    if let Some(f) = &report.failure {
        report.notes.push(f.to_string());
    }
    let dir = out.dir().to_path_buf();
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config: config.clone(),
        streams: report.streams,
        replicas: report.replicas,
        threads,
        wall_clock_seconds: wall,
        status,
        notes: report.notes,
        outputs: out.into_digests(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    match report.failure {
        Some(f) => Err(f),
        None => Ok(manifest),
    }
}

/// Re-run the command recorded in `manifest_path`, writing to `out_dir`.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest, CliError> {
    let old = RunManifest::load(manifest_path)?;
    let mut config = old.config.clone();
    config.output.dir = Some(out_dir.to_path_buf());
    execute(old.command, &config)
}
