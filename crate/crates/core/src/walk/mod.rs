//! Quenched trajectories of the walk in a fixed environment.

mod embedded;

pub use embedded::{
    crossing_probability, decompose_hitting_time, extract_embedded, BoundarySet, Components, EmbeddedRecord,
};

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::SiteField;
use crate::rng::{unit_f64, walk_rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("walk reached site {site} at time {time}, outside the environment window; enlarge the window")]
    OutOfWindow { site: i64, time: u64 },
    #[error("step budget must be at least 1")]
    ZeroBudget,
    #[error("hitting time of level {level} is censored at {steps} steps")]
    Censored { level: i64, steps: u64 },
    #[error("trajectory has no retained path")]
    NoPath,
    #[error("{0}")]
    Decomposition(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub start: i64,
    /// Force a right step at the origin (`ω₀ = 1`).
    pub reflected: bool,
    pub budget: u64,
    pub seed: u64,
    pub stream: u64,
    /// Sites whose first hitting times are recorded; real levels should be
    /// passed as `⌊level⌋`.
    pub targets: Vec<i64>,
    /// Stop as soon as every target has been hit.
    pub stop_when_hit: bool,
    pub keep_path: bool,
}

impl WalkConfig {
    pub fn new(budget: u64, seed: u64, stream: u64) -> Self {
        Self {
            start: 0,
            reflected: false,
            budget,
            seed,
            stream,
            targets: Vec::new(),
            stop_when_hit: false,
            keep_path: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub site: i64,
    /// First hitting time, `None` if censored at the budget.
    pub time: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub seed: u64,
    pub stream: u64,
    pub reflected: bool,
    pub start: i64,
    /// Steps actually simulated.
    pub steps: u64,
    pub final_position: i64,
    pub min_position: i64,
    pub max_position: i64,
    pub hits: Vec<Hit>,
    /// `X_0, X_1, ..., X_steps` when retained.
    #[serde(skip)]
    pub path: Option<Vec<i32>>,
}

impl TrajectorySummary {
    pub fn hit_time(&self, site: i64) -> Option<u64> {
        self.hits.iter().find(|h| h.site == site).and_then(|h| h.time)
    }

    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }

    /// `t,X_t` rows of the retained path.
    pub fn path_csv(&self) -> Result<String, WalkError> {
        let path = self.path.as_ref().ok_or(WalkError::NoPath)?;
        let mut out = String::with_capacity(path.len() * 8 + 8);
        out.push_str("t,X_t\n");
        for (t, x) in path.iter().enumerate() {
            out.push_str(&format!("{t},{x}\n"));
        }
        Ok(out)
    }
}

/// One step from `x`: right with probability `ω_x`.
#[inline]
fn step<F: SiteField>(field: &mut F, rng: &mut ChaCha8Rng, x: i64, reflected: bool, time: u64) -> Result<i64, WalkError> {
    let u = unit_f64(rng.next_u64());
    if reflected && x == 0 {
        return Ok(1);
    }
    let w = field.omega_at(x).ok_or(WalkError::OutOfWindow { site: x, time })?;
    Ok(if u < w { x + 1 } else { x - 1 })
}

/// Simulate a trajectory; deterministic in `(seed, stream)`.
pub fn run<F: SiteField>(field: &mut F, config: &WalkConfig) -> Result<TrajectorySummary, WalkError> {
    if config.budget == 0 {
        return Err(WalkError::ZeroBudget);
    }
    let mut rng = walk_rng(config.seed, config.stream);
    let mut x = config.start;
    let mut hits: Vec<Hit> = config.targets.iter().map(|&site| Hit { site, time: None }).collect();
    let mut pending = hits.len();
    let record = |t: u64, x: i64, hits: &mut Vec<Hit>, pending: &mut usize| {
        for h in hits.iter_mut() {
            if h.time.is_none() && h.site == x {
                h.time = Some(t);
                *pending -= 1;
            }
        }
    };
    record(0, x, &mut hits, &mut pending);
    let mut path = config.keep_path.then(|| {
        let mut p = Vec::with_capacity((config.budget.min(1 << 26) + 1) as usize);
        p.push(x as i32);
        p
    });
    let (mut lo, mut hi) = (x, x);
    let mut t = 0;
    while t < config.budget {
        if config.stop_when_hit && pending == 0 && !hits.is_empty() {
            break;
        }
        x = step(field, &mut rng, x, config.reflected, t)?;
        t += 1;
        lo = lo.min(x);
        hi = hi.max(x);
        if pending > 0 {
            record(t, x, &mut hits, &mut pending);
        }
        if let Some(p) = path.as_mut() {
            p.push(x as i32);
        }
    }
    Ok(TrajectorySummary {
        seed: config.seed,
        stream: config.stream,
        reflected: config.reflected,
        start: config.start,
        steps: t,
        final_position: x,
        min_position: lo,
        max_position: hi,
        hits,
        path,
    })
}

/// Which end of `(lo, hi)` the walk reached first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitOutcome {
    Lower { time: u64 },
    Upper { time: u64 },
    Censored,
}

/// Run from `start` until `lo` or `hi` is hit (or `budget` steps elapse).
pub fn run_until_exit<F: SiteField>(
    field: &mut F,
    start: i64,
    lo: i64,
    hi: i64,
    reflected: bool,
    seed: u64,
    stream: u64,
    budget: u64,
) -> Result<ExitOutcome, WalkError> {
    let mut rng = walk_rng(seed, stream);
    let mut x = start;
    for t in 0..=budget {
        if x <= lo {
            return Ok(ExitOutcome::Lower { time: t });
        }
        if x >= hi {
            return Ok(ExitOutcome::Upper { time: t });
        }
        if t == budget {
            break;
        }
        x = step(field, &mut rng, x, reflected, t)?;
    }
    Ok(ExitOutcome::Censored)
}

/// First time the walk started at 0 reaches `target` within `budget` steps,
/// together with the position after the last simulated step.
///
/// Same random stream as [`run`], so results agree step for step.
pub fn first_passage<F: SiteField>(
    field: &mut F,
    target: i64,
    reflected: bool,
    seed: u64,
    stream: u64,
    budget: u64,
) -> Result<(Option<u64>, i64), WalkError> {
    let mut rng = walk_rng(seed, stream);
    let mut x = 0;
    if target == 0 {
        return Ok((Some(0), 0));
    }
    for t in 0..budget {
        x = step(field, &mut rng, x, reflected, t)?;
        if x == target {
            return Ok((Some(t + 1), x));
        }
    }
    Ok((None, x))
}

/// Position after exactly `steps` steps from 0.
pub fn position_after<F: SiteField>(
    field: &mut F,
    reflected: bool,
    seed: u64,
    stream: u64,
    steps: u64,
) -> Result<i64, WalkError> {
    let mut rng = walk_rng(seed, stream);
    let mut x = 0;
    for t in 0..steps {
        x = step(field, &mut rng, x, reflected, t)?;
    }
    Ok(x)
}
