//! Monte Carlo probabilities of moderate-deviation events, reference
//! exponents and exponent fits.

mod scan;
mod theory;

pub use scan::{exponent_scan, kks_scaling_check, transform_for, weighted_fit, ExponentEstimate, KksSummary, LadderPoint, LineFit, ScanTarget};
pub use theory::{figure_curve, theoretical_exponent, Law, TheoryExponent, Transform};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, EnvironmentModel, LazyEnvironment, SiteField};
use crate::num::floor_site;
use crate::rng::StreamDomain;
use crate::walk::{first_passage, position_after, WalkError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("invalid event: {0}")]
    InvalidSpec(String),
    #[error("replicas must be at least 1")]
    ZeroReplicas,
    #[error("environment window [{lo}, {hi}] does not cover [-{n}, {n}]")]
    Window { lo: i64, hi: i64, n: u64 },
    #[error("no theorem covers this case: {0}")]
    NoTheorem(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// `T_{n^ν} > n`
    SlowdownHit,
    /// `X_n < n^ν`
    SlowdownPos,
    /// `X_n < -n^ν`
    BacktrackPos,
    /// `T_{-n^ν} < n`
    BacktrackHit,
    /// `X_n > n^ν`
    SpeedupPos,
    /// `T_{n^ν} < n`
    SpeedupHit,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::SlowdownHit,
        EventKind::SlowdownPos,
        EventKind::BacktrackPos,
        EventKind::BacktrackHit,
        EventKind::SpeedupPos,
        EventKind::SpeedupHit,
    ];

    pub fn is_backtrack(self) -> bool {
        matches!(self, EventKind::BacktrackPos | EventKind::BacktrackHit)
    }

    pub fn is_slowdown(self) -> bool {
        matches!(self, EventKind::SlowdownHit | EventKind::SlowdownPos)
    }

    pub fn is_hit(self) -> bool {
        matches!(self, EventKind::SlowdownHit | EventKind::BacktrackHit | EventKind::SpeedupHit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub kind: EventKind,
    pub nu: f64,
    #[serde(default)]
    pub reflected: bool,
    pub n: u64,
}

impl EventSpec {
    pub fn new(kind: EventKind, nu: f64, reflected: bool, n: u64) -> Result<Self, EstimateError> {
        let spec = Self { kind, nu, reflected, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(EstimateError::InvalidSpec(format!("nu = {} is not in (0, 1)", self.nu)));
        }
        if self.kind.is_backtrack() && self.reflected {
            return Err(EstimateError::InvalidSpec("backtracking events need the walk on Z, not the reflected walk".into()));
        }
        if self.n < 2 {
            return Err(EstimateError::InvalidSpec(format!("n = {} must be at least 2", self.n)));
        }
        Ok(())
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    /// `n^ν`.
    pub fn level(&self) -> f64 {
        (self.n as f64).powf(self.nu)
    }

    /// Whether the event occurs for the trajectory `(seed, stream)` in `field`.
    ///
    /// Hitting events stop as soon as they are decided; a level not reached
    /// within the horizon counts as `T > n`.
    pub fn occurs<F: SiteField>(&self, field: &mut F, seed: u64, stream: u64) -> Result<bool, WalkError> {
        let level = self.level();
        let n = self.n;
        let r = self.reflected;
        Ok(match self.kind {
            EventKind::SlowdownHit => first_passage(field, floor_site(level), r, seed, stream, n)?.0.is_none(),
            EventKind::SpeedupHit => first_passage(field, floor_site(level), r, seed, stream, n - 1)?.0.is_some(),
            EventKind::BacktrackHit => first_passage(field, floor_site(-level), r, seed, stream, n - 1)?.0.is_some(),
            EventKind::SlowdownPos => (position_after(field, r, seed, stream, n)? as f64) < level,
            EventKind::SpeedupPos => (position_after(field, r, seed, stream, n)? as f64) > level,
            EventKind::BacktrackPos => (position_after(field, r, seed, stream, n)? as f64) < -level,
        })
    }
}

/// Wilson score interval for `k` successes out of `m` trials at `z` standard
/// deviations.
pub fn wilson_interval(k: u64, m: u64, z: f64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 1.0);
    }
    let (k, m) = (k as f64, m as f64);
    let p = k / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let centre = (p + z2 / (2.0 * m)) / denom;
    let half = z * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Two-sided 95% normal quantile used for reported intervals.
pub const DEFAULT_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub spec: EventSpec,
    pub law: Law,
    pub replicas: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub z: f64,
    /// No successes or no failures; the point estimate sits on the boundary.
    pub degenerate: bool,
}

impl ProbabilityEstimate {
    fn new(spec: EventSpec, law: Law, replicas: u64, successes: u64) -> Self {
        let (lo, hi) = wilson_interval(successes, replicas, DEFAULT_Z);
        Self {
            spec,
            law,
            replicas,
            successes,
            p_hat: successes as f64 / replicas as f64,
            lo,
            hi,
            z: DEFAULT_Z,
            degenerate: successes == 0 || successes == replicas,
        }
    }

    pub fn interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.successes, self.replicas, z)
    }
}

fn check_inputs(spec: &EventSpec, replicas: u64) -> Result<(), EstimateError> {
    spec.validate()?;
    if replicas == 0 {
        return Err(EstimateError::ZeroReplicas);
    }
    Ok(())
}

/// Count successes over replicas in parallel; the sum does not depend on the
/// schedule.
fn count<F>(replicas: u64, f: F) -> Result<u64, EstimateError>
where
    F: Fn(u64) -> Result<bool, EstimateError> + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| f(r).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Repeated walks in one fixed environment; replica `r` uses walk stream
/// `r` of `seed`.
pub fn quenched_probability(
    env: &Environment,
    spec: &EventSpec,
    replicas: u64,
    seed: u64,
) -> Result<ProbabilityEstimate, EstimateError> {
    check_inputs(spec, replicas)?;
    let n = spec.n as i64;
    if !(env.contains(-n) && env.contains(n)) {
        return Err(EstimateError::Window { lo: env.lo(), hi: env.hi(), n: spec.n });
    }
    let successes = count(replicas, |r| Ok(spec.occurs(&mut &*env, seed, StreamDomain::Walk.stream(r))?))?;
    Ok(ProbabilityEstimate::new(*spec, Law::Quenched, replicas, successes))
}

/// One fresh environment and one walk per replica.
pub fn annealed_probability(
    model: &EnvironmentModel,
    spec: &EventSpec,
    replicas: u64,
    seed: u64,
) -> Result<ProbabilityEstimate, EstimateError> {
    check_inputs(spec, replicas)?;
    let successes = (0..replicas)
        .into_par_iter()
        .map_init(
            || LazyEnvironment::new(model, seed, 0, spec.reflected),
            |lazy, r| -> Result<u64, EstimateError> {
                lazy.reset(seed, StreamDomain::Environment.stream(r));
                Ok(u64::from(spec.occurs(lazy, seed, StreamDomain::Walk.stream(r))?))
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ProbabilityEstimate::new(*spec, Law::Annealed, replicas, successes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_right_walk() {
        let env = Environment::constant(-100, 100, 1.0).unwrap();
        let fast = EventSpec::new(EventKind::SpeedupHit, 0.5, false, 100).unwrap();
        assert_eq!(quenched_probability(&env, &fast, 50, 1).unwrap().p_hat, 1.0);
        let slow = EventSpec::new(EventKind::SlowdownHit, 0.5, false, 100).unwrap();
        let e = quenched_probability(&env, &slow, 50, 1).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert!(e.degenerate && e.hi > 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(EventSpec::new(EventKind::BacktrackHit, 0.5, true, 100).is_err());
        assert!(EventSpec::new(EventKind::SlowdownHit, 1.0, false, 100).is_err());
        let env = Environment::constant(-10, 10, 0.7).unwrap();
        let spec = EventSpec::new(EventKind::SlowdownHit, 0.5, false, 100).unwrap();
        assert!(matches!(quenched_probability(&env, &spec, 10, 0), Err(EstimateError::Window { .. })));
        let env = Environment::constant(-100, 100, 0.7).unwrap();
        assert!(matches!(quenched_probability(&env, &spec, 0, 0), Err(EstimateError::ZeroReplicas)));
    }

    #[test]
    fn wilson_contains_point_and_is_symmetric() {
        let (lo, hi) = wilson_interval(30, 100, 2.0);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo2, hi2) = wilson_interval(70, 100, 2.0);
        assert!((lo - (1.0 - hi2)).abs() < 1e-15 && (hi - (1.0 - lo2)).abs() < 1e-15);
    }

    #[test]
    fn near_deterministic_annealed() {
        let model = EnvironmentModel::deterministic(1.0 - 1e-9).unwrap();
        let spec = EventSpec::new(EventKind::SpeedupHit, 0.5, false, 100).unwrap();
        assert!(annealed_probability(&model, &spec, 200, 4).unwrap().p_hat > 0.99);
    }
}
