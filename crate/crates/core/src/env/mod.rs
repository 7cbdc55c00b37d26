//! Environment laws, sampled environments and their potentials.

mod model;
mod potential;
mod sample;

pub use model::{
    solve_kappa, EnvironmentModel, Hypotheses, Hypothesis, NegativeMoment, Regime, SiteLaw,
    ValidationReport, BETA_LOWER, BETA_UPPER, EPSILON_GRID,
};
pub use potential::{build_potential, Potential};
pub use sample::{
    sample_environment, Environment, LazyEnvironment, SeedRecord, SiteField, SiteSampler,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("(1.1) fails: E[ln rho] = {mean_log_rho} is not negative")]
    NotTransient { mean_log_rho: f64 },
    #[error("kappa root not bracketed below s = {max}")]
    KappaBracket { max: f64 },
    #[error("kappa bisection did not converge (residual {residual:.3e})")]
    KappaNonConvergence { residual: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("invalid window [{lo}, {hi}]: must satisfy lo <= 0 <= hi")]
    InvalidWindow { lo: i64, hi: i64 },
    #[error("site {site}: omega = {value} is outside [0, 1]")]
    InvalidOmega { site: i64, value: f64 },
    #[error("site {site}: omega = {value} makes the potential degenerate")]
    Degenerate { site: i64, value: f64 },
    #[error("site {site} is outside the environment window")]
    OutOfWindow { site: i64 },
}
