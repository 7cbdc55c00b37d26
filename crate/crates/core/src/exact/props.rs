use serde::{Deserialize, Serialize};

use super::{hitting_time_tail, ExactError, IntervalChain, Survival, DEFAULT_BUDGET};

/// Constant of the climbing bound, `e`.
pub const CLIMB_CONSTANT: f64 = std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimbCheck {
    /// `P^x[T_y < s]`.
    pub lhs: f64,
    /// `e (1 + s) π(h) / π(x)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Compare the exact `P^x[T_y < s]` with `e (1 + s) π(h) / π(x)`.
pub fn check_climb_bound(chain: &IntervalChain, x: i64, h: i64, y: i64, s: u64) -> Result<ClimbCheck, ExactError> {
    if !(x <= h && h <= y) {
        return Err(ExactError::Ordering { a: x, x: h, b: y });
    }
    for site in [x, y] {
        if !chain.contains(site) {
            return Err(ExactError::OutOfRange { site, a: chain.a(), c: chain.c() });
        }
    }
    if s == 0 {
        return Err(ExactError::Budget { budget: 0 });
    }
    let tail = hitting_time_tail(chain, x, &[y], s - 1)?;
    if !tail.complete {
        return Err(ExactError::Budget { budget: DEFAULT_BUDGET });
    }
    let lhs = 1.0 - tail.probability;
    let rhs = CLIMB_CONSTANT * (1.0 + s as f64) * (chain.ln_pi(h) - chain.ln_pi(x)).exp();
    Ok(ClimbCheck { lhs, rhs, holds: lhs <= rhs })
}

/// Per-`u` details of the confinement sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UPoint {
    pub u: f64,
    /// `min { t : max_x P^x[T > t] ≤ e^{-u} }`.
    pub t_upper: u64,
    /// Smallest admissible constant for this `u` in the upper bound.
    pub gamma_upper: f64,
    /// `min_x max { m : P^x[T ≥ m] ≥ e^{-u} / (2L) }` over interior `x`.
    pub m_lower: Option<u64>,
    pub gamma_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LowerConstant {
    Value { gamma: f64 },
    NotApplicable { reason: String },
    /// Only `u = 0` on the grid: the bound holds for any constant.
    Vacuous,
}

/// Empirical constants of the confinement bounds for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementConstants {
    /// Smallest `γ` with `max_x P^x[T_{a,c} > u γ L³ (L + M̃) e^H] ≤ e^{-u}` on the grid
    /// (0 when the grid only has `u = 0`).
    pub upper: f64,
    pub lower: LowerConstant,
    pub points: Vec<UPoint>,
}

/// Sweep `u_grid` with exact exit-time tails of `T_{{a,c}}`.
///
/// Starting points `a` and `c` are excluded from the lower bound: there
/// `T = 0` and no constant can work.
pub fn confinement_constants(chain: &IntervalChain, u_grid: &[f64]) -> Result<ConfinementConstants, ExactError> {
    let (a, c) = (chain.a(), chain.c());
    let len = (c - a) as f64;
    let shape = chain.shape();
    let scale_upper = len.powi(3) * (len + shape.m_tilde) * shape.h.exp();

    let lower_reason = {
        let top_right = (shape.b..c).map(|x| chain.v(x)).fold(f64::NEG_INFINITY, f64::max);
        let top_left = (a..=shape.b).map(|x| chain.v(x)).fold(f64::NEG_INFINITY, f64::max);
        if chain.v(c - 1) < top_right {
            Some("c-1 is not the highest point of [b, c-1]".to_string())
        } else if chain.v(a) < top_left {
            Some("a is not the highest point of [a, b]".to_string())
        } else if shape.h_star.exp() < 16.0 * CLIMB_CONSTANT {
            Some(format!("e^H* = {:.4} is below 16e", shape.h_star.exp()))
        } else {
            None
        }
    };

    let positive: Vec<f64> = u_grid.iter().copied().filter(|&u| u > 0.0).collect();
    // Iterate until every upper target e^{-u} and, when the lower bound
    // applies, every e^{-u}/(2L) has been crossed.
    let mut surv = Survival::new(chain, &[a, c])?;
    let interior_min = |s: &Survival| s.values()[1..s.values().len() - 1].iter().copied().fold(f64::INFINITY, f64::min);
    let mut t_upper: Vec<Option<u64>> = vec![None; positive.len()];
    let mut m_lower: Vec<Option<u64>> = vec![None; positive.len()];
    loop {
        let (max, min) = (surv.max(), interior_min(&surv));
        for (k, &u) in positive.iter().enumerate() {
            if t_upper[k].is_none() && max <= (-u).exp() {
                t_upper[k] = Some(surv.time());
            }
            if m_lower[k].is_none() && min < (-u).exp() / (2.0 * len) {
                m_lower[k] = Some(surv.time());
            }
        }
        let upper_done = t_upper.iter().all(Option::is_some);
        let lower_done = lower_reason.is_some() || m_lower.iter().all(Option::is_some);
        if upper_done && lower_done {
            break;
        }
        if surv.time() >= DEFAULT_BUDGET {
            return Err(ExactError::Budget { budget: DEFAULT_BUDGET });
        }
        surv.step();
    }

    let ln2l = (2.0 * len).ln();
    let points: Vec<UPoint> = positive
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let t = t_upper[k].expect("loop ran until resolved");
            let m = if lower_reason.is_none() { m_lower[k] } else { None };
            UPoint {
                u,
                t_upper: t,
                gamma_upper: t as f64 / (u * scale_upper),
                m_lower: m,
                gamma_lower: m.map(|m| u * shape.h_star.exp() / (ln2l * m as f64)),
            }
        })
        .collect();

    let upper = points.iter().map(|p| p.gamma_upper).fold(0.0, f64::max);
    let lower = match lower_reason {
        Some(reason) => LowerConstant::NotApplicable { reason },
        None if points.is_empty() => LowerConstant::Vacuous,
        None => LowerConstant::Value {
            gamma: points.iter().filter_map(|p| p.gamma_lower).fold(0.0, f64::max),
        },
    };
    Ok(ConfinementConstants { upper, lower, points })
}

/// One line of an oracle-check report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub chain_id: String,
    pub quantity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl OracleRow {
    pub const CSV_HEADER: &'static str = "chain-id,quantity,lhs,rhs,holds";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{}", self.chain_id, self.quantity, self.lhs, self.rhs, self.holds)
    }
}
