use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    annealed_probability, quenched_probability, theoretical_exponent, EstimateError, EventKind, EventSpec, Law,
    ProbabilityEstimate, Transform,
};
use crate::env::{solve_kappa, Environment, EnvironmentModel, LazyEnvironment};
use crate::rng::{mix64, StreamDomain};
use crate::walk::position_after;

/// Largest horizon at which double-log values are reported without a caveat.
const DOUBLE_LOG_CAVEAT_N: u64 = 1 << 12;

#[derive(Debug, Clone, Copy)]
pub enum ScanTarget<'a> {
    Annealed,
    /// Repeated walks in this environment.
    Quenched(&'a Environment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub n: u64,
    pub seed: u64,
    pub successes: u64,
    pub replicas: u64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    /// `g(p̂) / ln n` with `g` the scan's transform; absent when `p̂ ∈ {0, 1}`.
    pub transform_value: Option<f64>,
    pub used_in_fit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// From the inverse-variance weights alone.
    pub stderr: f64,
    /// `sqrt(Σ w r² / (k - 2))`; near 1 when the weights are honest.
    pub residual_spread: f64,
    pub points: usize,
}

/// Weighted least squares of `y` on `x` with weights `1 / var`; needs at
/// least three points.
pub fn weighted_fit(x: &[f64], y: &[f64], var: &[f64]) -> Option<LineFit> {
    let k = x.len();
    if k < 3 || y.len() != k || var.len() != k || var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let w: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..k {
        sxx += w[i] * (x[i] - xm).powi(2);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2: f64 = (0..k).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    Some(LineFit {
        slope,
        intercept,
        stderr: (1.0 / sxx).sqrt(),
        residual_spread: (chi2 / (k - 2) as f64).sqrt(),
        points: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub kind: EventKind,
    pub law: Law,
    pub nu: f64,
    pub reflected: bool,
    pub replicas: u64,
    pub seed: u64,
    pub kappa: Option<f64>,
    pub transform: Transform,
    pub points: Vec<LadderPoint>,
    /// Slope of `g(p̂)` against `ln n`.
    pub fit: Option<LineFit>,
    pub theory: Option<f64>,
    pub gap: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl ExponentEstimate {
    pub const CSV_HEADER: &'static str = "n,p_hat,lo,hi,transform_value";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for p in &self.points {
            let t = p.transform_value.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", p.n, p.p_hat, p.lo, p.hi, t));
        }
        out
    }

    /// `{slope, stderr, theory, gap, ...}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "law": self.law,
            "nu": self.nu,
            "reflected": self.reflected,
            "transform": self.transform,
            "kappa": self.kappa,
            "slope": self.fit.map(|f| f.slope),
            "stderr": self.fit.map(|f| f.stderr),
            "residual_spread": self.fit.map(|f| f.residual_spread),
            "points_used": self.fit.map_or(0, |f| f.points),
            "theory": self.theory,
            "gap": self.gap,
            "diagnostics": self.diagnostics,
        })
    }
}

/// Transform used for `kind` under `law`: polynomial decay only for annealed
/// slowdown.
pub fn transform_for(kind: EventKind, law: Law) -> Transform {
    if law == Law::Annealed && kind.is_slowdown() {
        Transform::SingleLog
    } else {
        Transform::DoubleLog
    }
}

/// Seed of ladder point `n`, so that points are independent of each other.
fn point_seed(seed: u64, n: u64) -> u64 {
    mix64(seed ^ mix64(n))
}

/// Estimate the probability at each `n` of the ladder and fit the exponent.
pub fn exponent_scan(
    model: &EnvironmentModel,
    target: ScanTarget<'_>,
    template: &EventSpec,
    ladder: &[u64],
    replicas: u64,
    seed: u64,
) -> Result<ExponentEstimate, EstimateError> {
    if replicas == 0 {
        return Err(EstimateError::ZeroReplicas);
    }
    let law = match target {
        ScanTarget::Annealed => Law::Annealed,
        ScanTarget::Quenched(_) => Law::Quenched,
    };
    let transform = transform_for(template.kind, law);
    let kappa = solve_kappa(model)?;
    let mut diagnostics = Vec::new();
    let theory = match kappa.map(|k| theoretical_exponent(k, template.nu, template.kind, law, template.reflected)) {
        Some(Ok(t)) => Some(t.value),
        Some(Err(e)) => {
            diagnostics.push(e.to_string());
            None
        }
        None => {
            diagnostics.push("model has no kappa".into());
            None
        }
    };

    let mut points = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let spec = template.with_n(n);
        let s = point_seed(seed, n);
        let est: ProbabilityEstimate = match target {
            ScanTarget::Annealed => annealed_probability(model, &spec, replicas, s)?,
            ScanTarget::Quenched(env) => quenched_probability(env, &spec, replicas, s)?,
        };
        let ln_n = (n as f64).ln();
        points.push(LadderPoint {
            n,
            seed: s,
            successes: est.successes,
            replicas,
            p_hat: est.p_hat,
            lo: est.lo,
            hi: est.hi,
            transform_value: transform.apply(est.p_hat).map(|g| g / ln_n),
            used_in_fit: false,
        });
    }

    let (mut xs, mut ys, mut vars) = (Vec::new(), Vec::new(), Vec::new());
    for p in points.iter_mut() {
        if let (Some(g), Some(v)) = (transform.apply(p.p_hat), transform.variance(p.p_hat, p.replicas)) {
            xs.push((p.n as f64).ln());
            ys.push(g);
            vars.push(v);
            p.used_in_fit = true;
        }
    }
    let fit = weighted_fit(&xs, &ys, &vars);
    if fit.is_none() {
        diagnostics.push(format!("no fit: {} usable ladder points, at least 3 needed", xs.len()));
    }
    if transform == Transform::DoubleLog && ladder.iter().any(|&n| n > DOUBLE_LOG_CAVEAT_N) {
        diagnostics.push(format!(
            "double-log values beyond n = {DOUBLE_LOG_CAVEAT_N} are log-correction dominated"
        ));
    }
    let gap = match (fit, theory) {
        (Some(f), Some(t)) => Some(f.slope - t),
        _ => None,
    };
    Ok(ExponentEstimate {
        kind: template.kind,
        law,
        nu: template.nu,
        reflected: template.reflected,
        replicas,
        seed,
        kappa,
        transform,
        points,
        fit,
        theory,
        gap,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KksSummary {
    pub n: u64,
    pub replicas: u64,
    pub kappa: Option<f64>,
    /// `min(κ, 1)`, the almost-sure limit of the statistic.
    pub target: f64,
    /// Replicas with `X_n ≤ 1`, clamped to 2 before the logarithm.
    pub clamped: u64,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    /// `median - target`.
    pub gap: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Distribution of `ln max(X_n, 2) / ln n` over annealed replicas.
pub fn kks_scaling_check(model: &EnvironmentModel, n: u64, replicas: u64, seed: u64) -> Result<KksSummary, EstimateError> {
    if replicas == 0 {
        return Err(EstimateError::ZeroReplicas);
    }
    if n < 2 {
        return Err(EstimateError::InvalidSpec(format!("n = {n} must be at least 2")));
    }
    let kappa = solve_kappa(model)?;
    let positions: Vec<i64> = (0..replicas)
        .into_par_iter()
        .map_init(
            || LazyEnvironment::new(model, seed, 0, false),
            |lazy, r| {
                lazy.reset(seed, StreamDomain::Environment.stream(r));
                position_after(lazy, false, seed, StreamDomain::Walk.stream(r), n)
            },
        )
        .collect::<Result<_, _>>()?;
    let ln_n = (n as f64).ln();
    let clamped = positions.iter().filter(|&&x| x <= 1).count() as u64;
    let mut stats: Vec<f64> = positions.iter().map(|&x| (x.max(2) as f64).ln() / ln_n).collect();
    stats.sort_by(f64::total_cmp);
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let median = quantile(&stats, 0.5);
    let target = kappa.map_or(1.0, |k| k.min(1.0));
    Ok(KksSummary {
        n,
        replicas,
        kappa,
        target,
        clamped,
        mean,
        median,
        q10: quantile(&stats, 0.1),
        q25: quantile(&stats, 0.25),
        q75: quantile(&stats, 0.75),
        q90: quantile(&stats, 0.9),
        gap: median - target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|x| 0.5 - 2.0 * x).collect();
        let f = weighted_fit(&x, &y, &[1.0, 2.0, 0.5, 1.0]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 0.5).abs() < 1e-12);
        assert!(weighted_fit(&x[..2], &y[..2], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn short_ladder_gives_no_fit() {
        let model = EnvironmentModel::two_point_rho([2.0, 0.5], [0.25, 0.75]).unwrap();
        let spec = EventSpec::new(EventKind::SlowdownHit, 0.3, false, 64).unwrap();
        let est = exponent_scan(&model, ScanTarget::Annealed, &spec, &[64, 128], 200, 1).unwrap();
        assert!(est.fit.is_none());
        assert!(est.diagnostics.iter().any(|d| d.starts_with("no fit")));
    }

    #[test]
    fn ballistic_statistic_near_one() {
        let model = EnvironmentModel::deterministic(1.0 - 1e-9).unwrap();
        let k = kks_scaling_check(&model, 1 << 10, 20, 3).unwrap();
        assert!((k.median - 1.0).abs() < 1e-9);
        assert_eq!(k.clamped, 0);
    }
}
