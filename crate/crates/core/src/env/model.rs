use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::num::log_sum_exp;

/// Default truncation for beta-distributed ω.
pub const BETA_LOWER: f64 = 1e-6;
pub const BETA_UPPER: f64 = 1.0 - 1e-6;

const PROB_SUM_TOL: f64 = 1e-12;
const KAPPA_TOL: f64 = 1e-9;
const KAPPA_BRACKET_START: f64 = 1e-6;
const KAPPA_BRACKET_MAX: f64 = 128.0;
const KAPPA_MAX_ITER: usize = 400;
const QUAD_REL_TOL: f64 = 1e-10;

/// Grid on which integrability of ρ^{-ε} is certified.
pub const EPSILON_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];

/// Law of a single site's ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SiteLaw {
    /// Exactly two atoms `(ω, probability)`.
    TwoPoint { atoms: Vec<(f64, f64)> },
    FiniteSupport { atoms: Vec<(f64, f64)> },
    /// Beta(α, β) conditioned on `[lower, upper]`.
    BetaTruncated {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_lower")]
        lower: f64,
        #[serde(default = "default_upper")]
        upper: f64,
    },
}

fn default_lower() -> f64 {
    BETA_LOWER
}

fn default_upper() -> f64 {
    BETA_UPPER
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(flatten)]
    law: SiteLaw,
    #[serde(default)]
    lattice: bool,
}

/// Parametric law of ω₀ for an i.i.d. environment.
///
/// Construction (including deserialization) checks the shape of the law:
/// atoms strictly inside (0,1), non-negative probabilities summing to one,
/// sane beta parameters. Probabilistic hypotheses such as transience are
/// checked separately by [`EnvironmentModel::validate_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct EnvironmentModel {
    #[serde(flatten)]
    law: SiteLaw,
    /// Metadata only: whether ln ρ₀ is lattice-valued.
    lattice: bool,
}

impl TryFrom<RawModel> for EnvironmentModel {
    type Error = EnvError;

    fn try_from(raw: RawModel) -> Result<Self, EnvError> {
        EnvironmentModel::new(raw.law, raw.lattice)
    }
}

fn check_atoms(atoms: &[(f64, f64)]) -> Result<(), EnvError> {
    if atoms.is_empty() {
        return Err(EnvError::InvalidModel("atoms: at least one atom is required".into()));
    }
    for (i, &(w, p)) in atoms.iter().enumerate() {
        if !(w > 0.0 && w < 1.0) {
            return Err(EnvError::InvalidModel(format!(
                "atoms[{i}]: value {w} is not strictly inside (0,1)"
            )));
        }
        if !(p >= 0.0 && p.is_finite()) {
            return Err(EnvError::InvalidModel(format!(
                "atoms[{i}]: probability {p} is not a non-negative number"
            )));
        }
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(EnvError::InvalidModel(format!(
            "atoms: probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl EnvironmentModel {
    pub fn new(law: SiteLaw, lattice: bool) -> Result<Self, EnvError> {
        match &law {
            SiteLaw::TwoPoint { atoms } => {
                if atoms.len() != 2 {
                    return Err(EnvError::InvalidModel(format!(
                        "atoms: two-point law needs exactly 2 atoms, got {}",
                        atoms.len()
                    )));
                }
                check_atoms(atoms)?;
            }
            SiteLaw::FiniteSupport { atoms } => check_atoms(atoms)?,
            SiteLaw::BetaTruncated { alpha, beta, lower, upper } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(EnvError::InvalidModel(format!("alpha: {alpha} must be positive")));
                }
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(EnvError::InvalidModel(format!("beta: {beta} must be positive")));
                }
                if !(*lower > 0.0 && lower < upper && *upper < 1.0) {
                    return Err(EnvError::InvalidModel(format!(
                        "lower/upper: need 0 < lower < upper < 1, got [{lower}, {upper}]"
                    )));
                }
            }
        }
        Ok(Self { law, lattice })
    }

    /// Two-point law given directly in terms of ρ values.
    pub fn two_point_rho(rho: [f64; 2], prob: [f64; 2]) -> Result<Self, EnvError> {
        let atoms = vec![(1.0 / (1.0 + rho[0]), prob[0]), (1.0 / (1.0 + rho[1]), prob[1])];
        Self::new(SiteLaw::TwoPoint { atoms }, true)
    }

    /// Deterministic environment ω ≡ w.
    pub fn deterministic(w: f64) -> Result<Self, EnvError> {
        Self::new(SiteLaw::FiniteSupport { atoms: vec![(w, 1.0)] }, true)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        serde_json::from_str(text).map_err(|e| EnvError::Parse(e.to_string()))
    }

    pub fn law(&self) -> &SiteLaw {
        &self.law
    }

    pub fn lattice(&self) -> bool {
        self.lattice
    }

    fn discrete_atoms(&self) -> Option<&[(f64, f64)]> {
        match &self.law {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => Some(atoms),
            SiteLaw::BetaTruncated { .. } => None,
        }
    }

    /// `ln E[ρ₀^s]`.
    pub fn log_moment(&self, s: f64) -> Result<f64, EnvError> {
        match &self.law {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => {
                Ok(log_sum_exp(atoms.iter().filter(|a| a.1 > 0.0).map(|&(w, p)| {
                    let ln_rho = ((1.0 - w) / w).ln();
                    p.ln() + s * ln_rho
                })))
            }
            SiteLaw::BetaTruncated { alpha, beta, lower, upper } => {
                let (a, b) = (*alpha, *beta);
                let num = beta_log_integral(*lower, *upper, |w| {
                    s * ((1.0 - w) / w).ln() + (a - 1.0) * w.ln() + (b - 1.0) * (1.0 - w).ln()
                })?;
                let den = beta_log_integral(*lower, *upper, |w| {
                    (a - 1.0) * w.ln() + (b - 1.0) * (1.0 - w).ln()
                })?;
                Ok(num - den)
            }
        }
    }

    /// `E[ρ₀^s]`, possibly `+inf` on overflow.
    pub fn moment(&self, s: f64) -> Result<f64, EnvError> {
        Ok(self.log_moment(s)?.exp())
    }

    /// `E[ln ρ₀]`.
    pub fn mean_log_rho(&self) -> Result<f64, EnvError> {
        match &self.law {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => Ok(atoms
                .iter()
                .map(|&(w, p)| p * ((1.0 - w) / w).ln())
                .sum()),
            SiteLaw::BetaTruncated { alpha, beta, lower, upper } => {
                let (a, b) = (*alpha, *beta);
                let log_den = beta_log_integral(*lower, *upper, |w| {
                    (a - 1.0) * w.ln() + (b - 1.0) * (1.0 - w).ln()
                })?;
                // ln ρ changes sign at w = 1/2; integrate the signed integrand directly.
                let f = |w: f64| {
                    ((1.0 - w) / w).ln()
                        * ((a - 1.0) * w.ln() + (b - 1.0) * (1.0 - w).ln() - log_den).exp()
                };
                let mut total = 0.0;
                for (x0, x1) in split_at_half(*lower, *upper) {
                    let out = quadrature::integrate(f, x0, x1, 1e-13);
                    if !out.integral.is_finite() || out.error_estimate > 1e-8 {
                        return Err(EnvError::Quadrature("E[ln rho]".into()));
                    }
                    total += out.integral;
                }
                Ok(total)
            }
        }
    }

    /// `P[ρ₀ > 1]`, i.e. `P[ω₀ < 1/2]`.
    pub fn prob_rho_above_one(&self) -> Result<f64, EnvError> {
        match &self.law {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => {
                Ok(atoms.iter().filter(|a| a.0 < 0.5).map(|a| a.1).sum())
            }
            SiteLaw::BetaTruncated { lower, .. } => Ok(if *lower < 0.5 { 1.0 } else { 0.0 }),
        }
    }

    /// Smallest atom value, or the lower truncation bound.
    pub fn min_omega(&self) -> f64 {
        match &self.law {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => {
                atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min)
            }
            SiteLaw::BetaTruncated { lower, .. } => *lower,
        }
    }

    /// Largest atom value, or the upper truncation bound.
    pub fn max_omega(&self) -> f64 {
        match &self.law {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => {
                atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max)
            }
            SiteLaw::BetaTruncated { upper, .. } => *upper,
        }
    }

    /// Same law with atoms sorted and duplicate values merged.
    pub fn canonical(&self) -> Self {
        match self.discrete_atoms() {
            None => self.clone(),
            Some(atoms) => {
                let mut sorted = atoms.to_vec();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
                for (w, p) in sorted {
                    match merged.last_mut() {
                        Some(last) if last.0 == w => last.1 += p,
                        _ => merged.push((w, p)),
                    }
                }
                let law = if merged.len() == 2 {
                    SiteLaw::TwoPoint { atoms: merged }
                } else {
                    SiteLaw::FiniteSupport { atoms: merged }
                };
                Self { law, lattice: self.lattice }
            }
        }
    }
}

fn split_at_half(lower: f64, upper: f64) -> Vec<(f64, f64)> {
    if lower < 0.5 && upper > 0.5 {
        vec![(lower, 0.5), (0.5, upper)]
    } else {
        vec![(lower, upper)]
    }
}

/// `ln ∫_lower^upper exp(g(w)) dw`, with the integrand rescaled by its
/// maximum on a coarse grid so that large exponents do not overflow.
fn beta_log_integral<G: Fn(f64) -> f64>(lower: f64, upper: f64, g: G) -> Result<f64, EnvError> {
    let grid = 512;
    let mut peak = f64::NEG_INFINITY;
    for k in 0..=grid {
        let w = lower + (upper - lower) * k as f64 / grid as f64;
        peak = peak.max(g(w));
    }
    if !peak.is_finite() {
        return Err(EnvError::Quadrature("integrand peak is not finite".into()));
    }
    let mut total = 0.0;
    for (x0, x1) in split_at_half(lower, upper) {
        let out = quadrature::integrate(|w| (g(w) - peak).exp(), x0, x1, 1e-15);
        if !out.integral.is_finite() {
            return Err(EnvError::Quadrature("integral is not finite".into()));
        }
        total += out.integral;
        if out.error_estimate > QUAD_REL_TOL * out.integral.abs().max(1e-300) && out.error_estimate > 1e-14 {
            return Err(EnvError::Quadrature(format!(
                "error estimate {:.3e} on integral {:.3e}",
                out.error_estimate, out.integral
            )));
        }
    }
    if total <= 0.0 {
        return Err(EnvError::Quadrature("integral underflowed".into()));
    }
    Ok(peak + total.ln())
}

/// Unique positive root κ of `E[ρ₀^κ] = 1`.
///
/// `s ↦ ln E[ρ₀^s]` is convex, zero at the origin with slope `E[ln ρ₀] < 0`,
/// so the root is bracketed by doubling from a tiny `s` and refined by
/// bisection. Returns `Ok(None)` when no positive root exists
/// (`P[ρ₀ > 1] = 0`, or the moment blows up before reaching 1).
pub fn solve_kappa(model: &EnvironmentModel) -> Result<Option<f64>, EnvError> {
    let mean = model.mean_log_rho()?;
    if !(mean < 0.0) {
        return Err(EnvError::NotTransient { mean_log_rho: mean });
    }
    if model.prob_rho_above_one()? == 0.0 {
        return Ok(None);
    }

    let mut lo = 0.0;
    let mut hi = KAPPA_BRACKET_START;
    loop {
        let f = model.log_moment(hi)?;
        if f > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > KAPPA_BRACKET_MAX {
            return Err(EnvError::KappaBracket { max: KAPPA_BRACKET_MAX });
        }
    }
    if lo == 0.0 {
        // The root sits below the first probe; cannot be separated from s = 0.
        return Err(EnvError::KappaBracket { max: KAPPA_BRACKET_START });
    }

    for _ in 0..KAPPA_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = model.log_moment(mid)?;
        if f <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Pick whichever end of the final bracket has the smaller residual.
    let (flo, fhi) = (model.log_moment(lo)?, model.log_moment(hi)?);
    let kappa = if flo.abs() <= fhi.abs() { lo } else { hi };
    let residual = (model.moment(kappa)? - 1.0).abs();
    if residual <= KAPPA_TOL {
        Ok(Some(kappa))
    } else if !fhi.is_finite() {
        Ok(None)
    } else {
        Err(EnvError::KappaNonConvergence { residual })
    }
}

/// Status of one of the standing hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Holds,
    Fails,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeMoment {
    pub epsilon: f64,
    /// `E[ρ₀^{-ε}]`, absent when it could not be certified.
    pub value: Option<f64>,
    pub status: Hypothesis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// κ > 1: positive speed.
    Ballistic,
    /// κ ≤ 1: zero speed.
    SubBallistic,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    /// `E[ln ρ₀] < 0`.
    pub transient: Hypothesis,
    /// Existence of κ.
    pub kappa_exists: Hypothesis,
    /// `E[ρ₀^{-ε₀}] < ∞` for some ε₀ > 0.
    pub negative_moment: Hypothesis,
}

impl Hypotheses {
    pub fn all_hold(&self) -> bool {
        self.transient == Hypothesis::Holds
            && self.kappa_exists == Hypothesis::Holds
            && self.negative_moment == Hypothesis::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: EnvironmentModel,
    pub mean_log_rho: f64,
    pub kappa: Option<f64>,
    pub negative_moments: Vec<NegativeMoment>,
    /// Largest grid ε with a certified finite negative moment.
    pub epsilon0: Option<f64>,
    pub lattice: bool,
    pub regime: Regime,
    pub hypotheses: Hypotheses,
    /// Human-readable notes, e.g. which hypothesis fails.
    pub notes: Vec<String>,
}

impl EnvironmentModel {
    /// Evaluate the standing hypotheses for this law.
    ///
    /// Never fails: quadrature trouble is reported as [`Hypothesis::Unknown`].
    pub fn validate_assumptions(&self) -> ValidationReport {
        let mut notes = Vec::new();
        let mean_log_rho = match self.mean_log_rho() {
            Ok(m) => m,
            Err(e) => {
                notes.push(format!("E[ln rho] unavailable: {e}"));
                f64::NAN
            }
        };
        let transient = if mean_log_rho.is_nan() {
            Hypothesis::Unknown
        } else if mean_log_rho < 0.0 {
            Hypothesis::Holds
        } else {
            notes.push(format!("(1.1) fails: E[ln rho] = {mean_log_rho} >= 0"));
            Hypothesis::Fails
        };

        let (kappa, kappa_exists) = if transient == Hypothesis::Holds {
            match solve_kappa(self) {
                Ok(Some(k)) => (Some(k), Hypothesis::Holds),
                Ok(None) => {
                    notes.push("(1.2) fails: E[rho^s] < 1 for every s > 0".into());
                    (None, Hypothesis::Fails)
                }
                Err(e) => {
                    notes.push(format!("(1.2) unknown: {e}"));
                    (None, Hypothesis::Unknown)
                }
            }
        } else {
            (None, if transient == Hypothesis::Fails { Hypothesis::Fails } else { Hypothesis::Unknown })
        };

        let negative_moments: Vec<NegativeMoment> = EPSILON_GRID
            .iter()
            .map(|&eps| match self.moment(-eps) {
                Ok(v) if v.is_finite() => NegativeMoment { epsilon: eps, value: Some(v), status: Hypothesis::Holds },
                Ok(_) => NegativeMoment { epsilon: eps, value: None, status: Hypothesis::Fails },
                Err(_) => NegativeMoment { epsilon: eps, value: None, status: Hypothesis::Unknown },
            })
            .collect();
        let epsilon0 = negative_moments
            .iter()
            .filter(|m| m.status == Hypothesis::Holds)
            .map(|m| m.epsilon)
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
        let negative_moment = if epsilon0.is_some() {
            Hypothesis::Holds
        } else if negative_moments.iter().any(|m| m.status == Hypothesis::Unknown) {
            Hypothesis::Unknown
        } else {
            Hypothesis::Fails
        };

        let regime = match kappa {
            Some(k) if k > 1.0 => Regime::Ballistic,
            Some(_) => Regime::SubBallistic,
            None => Regime::Undetermined,
        };

        ValidationReport {
            model: self.clone(),
            mean_log_rho,
            kappa,
            negative_moments,
            epsilon0,
            lattice: self.lattice,
            regime,
            hypotheses: Hypotheses { transient, kappa_exists, negative_moment },
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_model() -> EnvironmentModel {
        EnvironmentModel::two_point_rho([2.0, 0.25], [0.5, 0.5]).unwrap()
    }

    #[test]
    fn kappa_closed_forms() {
        // x = 2^κ solves x² − 4x + 3 = 0 → x = 3.
        let m = EnvironmentModel::two_point_rho([2.0, 0.5], [0.25, 0.75]).unwrap();
        let k = solve_kappa(&m).unwrap().unwrap();
        assert!((k - 3f64.log2()).abs() < 1e-9, "{k}");

        // x³ − 2x² + 1 = 0 → golden ratio root.
        let k = solve_kappa(&golden_model()).unwrap().unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((k - phi.log2()).abs() < 1e-9, "{k}");
    }

    #[test]
    fn deterministic_half_has_no_kappa() {
        let m = EnvironmentModel::two_point_rho([0.5, 0.5], [0.5, 0.5]).unwrap();
        assert_eq!(solve_kappa(&m).unwrap(), None);
        let m = EnvironmentModel::deterministic(2.0 / 3.0).unwrap();
        assert_eq!(solve_kappa(&m).unwrap(), None);
    }

    #[test]
    fn non_transient_model_is_rejected() {
        let m = EnvironmentModel::deterministic(1.0 / 3.0).unwrap();
        assert!(matches!(solve_kappa(&m), Err(EnvError::NotTransient { .. })));
        let r = m.validate_assumptions();
        assert_eq!(r.hypotheses.transient, Hypothesis::Fails);
        assert!((r.mean_log_rho - 2f64.ln()).abs() < 1e-12);
        assert!(r.notes.iter().any(|n| n.contains("(1.1) fails")));
    }

    #[test]
    fn report_for_log2_3_model() {
        let m = EnvironmentModel::two_point_rho([2.0, 0.5], [0.25, 0.75]).unwrap();
        let r = m.validate_assumptions();
        assert!((r.mean_log_rho + 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!(r.hypotheses.all_hold());
        assert_eq!(r.regime, Regime::Ballistic);
        assert_eq!(r.epsilon0, Some(4.0));
        assert!(golden_model().validate_assumptions().regime == Regime::SubBallistic);
    }

    #[test]
    fn shape_errors_name_the_field() {
        let e = EnvironmentModel::from_json(r#"{"kind":"two-point","atoms":[[0.3,0.5],[1.2,0.5]]}"#)
            .unwrap_err();
        assert!(e.to_string().contains("atoms[1]"), "{e}");
        let e = EnvironmentModel::from_json(r#"{"kind":"two-point","atoms":[[0.3,0.5],[0.6,0.6]]}"#)
            .unwrap_err();
        assert!(e.to_string().contains("sum"), "{e}");
        let e = EnvironmentModel::from_json(r#"{"kind":"beta-truncated","alpha":-1,"beta":2}"#).unwrap_err();
        assert!(e.to_string().contains("alpha"), "{e}");
    }

    #[test]
    fn json_example_parses() {
        let m = EnvironmentModel::from_json(
            r#"{"kind":"two-point","atoms":[[0.3333,0.25],[0.6667,0.75]],"lattice":true}"#,
        )
        .unwrap();
        assert!(m.lattice());
        let back: EnvironmentModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn beta_truncated_kappa_satisfies_moment_equation() {
        let m = EnvironmentModel::new(
            SiteLaw::BetaTruncated { alpha: 3.0, beta: 1.5, lower: BETA_LOWER, upper: BETA_UPPER },
            false,
        )
        .unwrap();
        assert!(m.mean_log_rho().unwrap() < 0.0);
        let k = solve_kappa(&m).unwrap().unwrap();
        assert!((m.moment(k).unwrap() - 1.0).abs() <= 1e-9);
        // Beta(a,b) moments of ω: E[ρ] = B(a-1, b+1)/B(a,b) = b/(a-1).
        let e_rho = m.moment(1.0).unwrap();
        assert!((e_rho - 1.5 / 2.0).abs() < 1e-6, "{e_rho}");
    }

    #[test]
    fn canonical_merges_duplicates() {
        let m = EnvironmentModel::new(
            SiteLaw::FiniteSupport { atoms: vec![(0.8, 0.25), (0.3, 0.5), (0.8, 0.25)] },
            false,
        )
        .unwrap();
        let c = m.canonical();
        assert_eq!(c.law(), &SiteLaw::TwoPoint { atoms: vec![(0.3, 0.5), (0.8, 0.5)] });
    }
}
