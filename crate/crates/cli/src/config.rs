use std::path::{Path, PathBuf};

use rwre_core::env::EnvironmentModel;
use rwre_core::estimate::{EventKind, Law};
use rwre_core::exact::IntervalChain;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One run: everything needed to reproduce its outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: Option<EnvironmentModel>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub event: Option<EventConfig>,
    #[serde(default)]
    pub ladder: Option<Ladder>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub replicas: Option<u64>,
    pub threads: Option<usize>,
    /// Replica budget of an estimate, summed over ladder points.
    pub budget: Option<u64>,
    /// Horizon of the valley decomposition.
    pub n: Option<u64>,
    /// Environment window `[lo, hi]`.
    pub window: Option<(i64, i64)>,
    /// Seed of the sampled environment; defaults to `seed`.
    pub env_seed: Option<u64>,
    pub reflected: bool,
    /// Step budget of each simulated trajectory.
    pub steps: Option<u64>,
    pub targets: Vec<i64>,
    pub keep_path: bool,
    pub nu_grid: Option<Vec<f64>>,
    /// Heights at which the tail of the maximal potential rise is estimated.
    pub tail_grid: Option<Vec<f64>>,
    pub crossing: Option<CrossingConfig>,
    /// Number of random chains in the oracle sweep.
    pub instances: Option<u64>,
    /// Extra chains checked by the oracle sweep, verbatim.
    pub chains: Vec<IntervalChain>,
    /// Overrides the model's κ for the exponent curve.
    pub kappa: Option<f64>,
    /// Number of `a` values in the B′ event grid.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingConfig {
    pub boundaries: usize,
    pub trials: u64,
    #[serde(default = "default_trial_budget")]
    pub budget: u64,
}

fn default_trial_budget() -> u64 {
    1_000_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventName {
    SlowdownHit,
    SlowdownPos,
    BacktrackPos,
    BacktrackHit,
    SpeedupPos,
    SpeedupHit,
    /// Distribution of `ln X_n / ln n`.
    Kks,
}

impl EventName {
    pub fn kind(self) -> Option<EventKind> {
        Some(match self {
            EventName::SlowdownHit => EventKind::SlowdownHit,
            EventName::SlowdownPos => EventKind::SlowdownPos,
            EventName::BacktrackPos => EventKind::BacktrackPos,
            EventName::BacktrackHit => EventKind::BacktrackHit,
            EventName::SpeedupPos => EventKind::SpeedupPos,
            EventName::SpeedupHit => EventKind::SpeedupHit,
            EventName::Kks => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub kind: EventName,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub reflected: bool,
    #[serde(default = "default_law")]
    pub law: Law,
    #[serde(default)]
    pub n: Option<u64>,
}

fn default_law() -> Law {
    Law::Annealed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ladder {
    Explicit { n: Vec<u64> },
    /// `base^from, ..., base^to`.
    Powers { base: u64, from: u32, to: u32 },
}

impl Ladder {
    pub fn values(&self) -> Result<Vec<u64>, CliError> {
        let values = match self {
            Ladder::Explicit { n } => n.clone(),
            Ladder::Powers { base, from, to } => {
                if from > to {
                    return Err(CliError::Config(format!("ladder: from = {from} exceeds to = {to}")));
                }
                (*from..=*to)
                    .map(|k| base.checked_pow(k))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| CliError::Config("ladder: n overflows".into()))?
            }
        };
        if values.is_empty() {
            return Err(CliError::Config("ladder: empty".into()));
        }
        if let Some(bad) = values.iter().find(|&&n| n < 2) {
            return Err(CliError::Config(format!("ladder: n = {bad} must be at least 2")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Scalar overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replicas: Option<u64>,
    pub threads: Option<usize>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
        // A manifest carries its configuration verbatim.
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => {
                map.remove("config").unwrap_or_default()
            }
            v => v,
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(r) = o.replicas {
            self.run.replicas = Some(r);
        }
        if let Some(t) = o.threads {
            self.run.threads = Some(t);
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
    }

    pub fn model(&self) -> Result<&EnvironmentModel, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("model: missing".into()))
    }

    pub fn event(&self) -> Result<&EventConfig, CliError> {
        self.event.as_ref().ok_or_else(|| CliError::Config("event: missing".into()))
    }

    pub fn replicas(&self) -> Result<u64, CliError> {
        match self.run.replicas {
            None => Err(CliError::Config("run.replicas: missing".into())),
            Some(0) => Err(CliError::Config("run.replicas: must be positive".into())),
            Some(r) => Ok(r),
        }
    }

    pub fn env_seed(&self) -> u64 {
        self.run.env_seed.unwrap_or(self.run.seed)
    }
}

/// ν values of the default exponent-curve grid: -0.95, -0.90, ..., 0.95.
pub fn default_nu_grid() -> Vec<f64> {
    (-19..=19).map(|k| k as f64 / 20.0).collect()
}
