use std::process::ExitCode;

use rwre_core::env::EnvError;
use rwre_core::estimate::EstimateError;
use rwre_core::exact::ExactError;
use rwre_core::valleys::ValleyError;
use rwre_core::walk::WalkError;
use thiserror::Error;

/// Failures of a run, each with a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Exit code 3.
    #[error("property failure: {0}")]
    Property(String),
    /// Exit code 4.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// Exit code 1.
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Property(_) => 3,
            CliError::Budget(_) => 4,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::OutOfWindow { .. } => CliError::Budget(e.to_string()),
            e => CliError::Config(format!("model: {e}")),
        }
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        match e {
            WalkError::OutOfWindow { .. } | WalkError::Censored { .. } => CliError::Budget(e.to_string()),
            WalkError::ZeroBudget => CliError::Config(format!("run.steps: {e}")),
            e => CliError::Property(e.to_string()),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Walk(w) => w.into(),
            EstimateError::Env(v) => v.into(),
            EstimateError::ZeroReplicas => CliError::Config("run.replicas: must be positive".into()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<ValleyError> for CliError {
    fn from(e: ValleyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::Budget { .. } => CliError::Budget(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}
