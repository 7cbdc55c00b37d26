use serde::{Deserialize, Serialize};

use super::{EstimateError, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Quenched,
    Annealed,
}

/// How a probability is turned into an exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `ln p / ln n`, polynomial decay.
    SingleLog,
    /// `ln(-ln p) / ln n`, stretched-exponential decay.
    DoubleLog,
}

impl Transform {
    /// `ln p` or `ln(-ln p)`; `None` outside `(0, 1)`.
    pub fn apply(self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        Some(match self {
            Transform::SingleLog => p.ln(),
            Transform::DoubleLog => (-p.ln()).ln(),
        })
    }

    /// Delta-method variance of [`Transform::apply`] at `p̂ = p` from `m` trials.
    pub fn variance(self, p: f64, m: u64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) || m == 0 {
            return None;
        }
        let var_p = p * (1.0 - p) / m as f64;
        let slope = match self {
            Transform::SingleLog => 1.0 / p,
            Transform::DoubleLog => 1.0 / (p * p.ln()),
        };
        Some(var_p * slope * slope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryExponent {
    pub value: f64,
    pub transform: Transform,
}

/// Limit exponent of `kind` under `law`.
///
/// Slowdown needs `ν ∈ (0, 1∧κ)`, speedup needs `κ < 1` and `ν ∈ (κ, 1)`,
/// backtracking needs `ν ∈ (0, 1)` and the walk on Z.
pub fn theoretical_exponent(
    kappa: f64,
    nu: f64,
    kind: EventKind,
    law: Law,
    reflected: bool,
) -> Result<TheoryExponent, EstimateError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(EstimateError::NoTheorem(format!("kappa = {kappa}")));
    }
    let no = |msg: String| Err(EstimateError::NoTheorem(msg));
    let balance = kappa / (kappa + 1.0);
    match kind {
        EventKind::SlowdownHit | EventKind::SlowdownPos => {
            if !(nu > 0.0 && nu < kappa.min(1.0)) {
                return no(format!("slowdown needs nu in (0, min(1, kappa)) = (0, {}), got {nu}", kappa.min(1.0)));
            }
            Ok(match law {
                Law::Annealed => TheoryExponent { value: -(kappa - nu), transform: Transform::SingleLog },
                Law::Quenched => {
                    let linear = 1.0 - nu / kappa;
                    let value = if reflected && kind == EventKind::SlowdownHit { linear } else { linear.min(balance) };
                    TheoryExponent { value, transform: Transform::DoubleLog }
                }
            })
        }
        EventKind::BacktrackPos | EventKind::BacktrackHit => {
            if reflected {
                return no("backtracking is not defined for the reflected walk".into());
            }
            if !(nu > 0.0 && nu < 1.0) {
                return no(format!("backtracking needs nu in (0, 1), got {nu}"));
            }
            let value = match (kind, law) {
                (EventKind::BacktrackPos, Law::Quenched) => nu.max(balance),
                _ => nu,
            };
            Ok(TheoryExponent { value, transform: Transform::DoubleLog })
        }
        EventKind::SpeedupHit | EventKind::SpeedupPos => {
            if kappa >= 1.0 {
                return no(format!("speedup needs kappa < 1, got {kappa}"));
            }
            if !(nu > kappa && nu < 1.0) {
                return no(format!("speedup needs nu in ({kappa}, 1), got {nu}"));
            }
            Ok(TheoryExponent { value: (nu - kappa) / (1.0 - kappa), transform: Transform::DoubleLog })
        }
    }
}

/// Quenched deviation exponent `f(ν)` of the walk on Z for `κ ∈ (0, 1)` and
/// `ν ∈ (-1, 1)`: backtracking to `-n^{-ν}` for `ν ≤ 0`, slowdown below `κ`,
/// speedup from `κ` on.
pub fn figure_curve(kappa: f64, nu: f64) -> Result<f64, EstimateError> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(EstimateError::NoTheorem(format!("the curve needs kappa in (0, 1), got {kappa}")));
    }
    if !(nu > -1.0 && nu < 1.0) {
        return Err(EstimateError::NoTheorem(format!("the curve is defined for nu in (-1, 1), got {nu}")));
    }
    let balance = kappa / (kappa + 1.0);
    Ok(if nu <= 0.0 {
        (-nu).max(balance)
    } else if nu < kappa {
        (1.0 - nu / kappa).min(balance)
    } else {
        (nu - kappa) / (1.0 - kappa)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let q = theoretical_exponent(0.5, 0.25, EventKind::SlowdownPos, Law::Quenched, false).unwrap();
        assert!((q.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(q.transform, Transform::DoubleLog);
        let s = theoretical_exponent(0.5, 0.75, EventKind::SpeedupPos, Law::Quenched, false).unwrap();
        assert!((s.value - 0.5).abs() < 1e-15);
        let a = theoretical_exponent(0.5, 0.25, EventKind::SlowdownHit, Law::Annealed, false).unwrap();
        assert_eq!((a.value, a.transform), (-0.25, Transform::SingleLog));
        let r = theoretical_exponent(0.5, 0.25, EventKind::SlowdownHit, Law::Quenched, true).unwrap();
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn uncovered_cases() {
        assert!(theoretical_exponent(1.5, 0.8, EventKind::SpeedupHit, Law::Quenched, false).is_err());
        assert!(theoretical_exponent(0.5, 0.6, EventKind::SlowdownHit, Law::Annealed, false).is_err());
        assert!(theoretical_exponent(0.5, 0.3, EventKind::BacktrackHit, Law::Annealed, true).is_err());
        assert!(figure_curve(1.2, 0.1).is_err());
    }

    #[test]
    fn curve_is_continuous_at_kappa_and_zero() {
        let k = 0.6;
        assert!(figure_curve(k, k - 1e-12).unwrap().abs() < 1e-9);
        assert_eq!(figure_curve(k, k).unwrap(), 0.0);
        let left = figure_curve(k, -1e-12).unwrap();
        let right = figure_curve(k, 1e-12).unwrap();
        assert!((left - right).abs() < 1e-9);
    }
}
