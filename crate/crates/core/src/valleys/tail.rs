use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EnvironmentModel, SiteSampler};
use crate::rng::{SiteKey, StreamDomain};

/// Grid points with fewer exceedances than this are left out of the fit.
pub const MIN_SURVIVORS: u64 = 25;
/// Extra depth below `-max h` at which a replica's scan stops.
const SCAN_SLACK: f64 = 40.0;
const MAX_SCAN: i64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub h: f64,
    /// Replicas with `S > h`.
    pub count: u64,
    pub frequency: f64,
    pub used_in_fit: bool,
}

/// Empirical tail of `S = max_{i≥0} V(i)` and its log-linear fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub replicas: u64,
    pub points: Vec<TailPoint>,
    /// Least-squares slope of `ln P̂[S > h]` against `h`; estimates `-κ`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Grid values dropped for lack of survivors.
    pub excluded: Vec<f64>,
    /// Replicas whose scan hit the step cap before resolving every grid point.
    pub unresolved: u64,
}

/// Simulate `S` for independent potentials and fit `ln P[S > h] ≈ c - κ h`.
pub fn max_depth_tail(model: &EnvironmentModel, h_grid: &[f64], replicas: u64, seed: u64) -> TailFit {
    let sampler = SiteSampler::new(model);
    let h_max = h_grid.iter().copied().fold(0.0, f64::max);
    let floor = -(h_max + SCAN_SLACK);

    let simulate = |r: u64| -> (f64, bool) {
        let key = SiteKey::new(seed, StreamDomain::PotentialTail.stream(r));
        let (mut v, mut s) = (0.0f64, 0.0f64);
        for i in 1..=MAX_SCAN {
            let w = sampler.draw(&key, i);
            v += ((1.0 - w) / w).ln();
            s = s.max(v);
            if s > h_max || v < floor {
                return (s, true);
            }
        }
        (s, false)
    };

    let (counts, unresolved) = (0..replicas)
        .into_par_iter()
        .fold(
            || (vec![0u64; h_grid.len()], 0u64),
            |(mut counts, mut unresolved), r| {
                let (s, done) = simulate(r);
                if !done {
                    unresolved += 1;
                }
                for (c, &h) in counts.iter_mut().zip(h_grid) {
                    if s > h {
                        *c += 1;
                    }
                }
                (counts, unresolved)
            },
        )
        .reduce(
            || (vec![0u64; h_grid.len()], 0u64),
            |(mut a, ua), (b, ub)| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                (a, ua + ub)
            },
        );

    let points: Vec<TailPoint> = h_grid
        .iter()
        .zip(&counts)
        .map(|(&h, &count)| TailPoint {
            h,
            count,
            frequency: count as f64 / replicas.max(1) as f64,
            used_in_fit: count >= MIN_SURVIVORS && count < replicas,
        })
        .collect();
    let excluded = points.iter().filter(|p| !p.used_in_fit).map(|p| p.h).collect();
    let fit: Vec<(f64, f64)> =
        points.iter().filter(|p| p.used_in_fit).map(|p| (p.h, p.frequency.ln())).collect();
    let (slope, intercept) = match least_squares(&fit) {
        Some((s, c)) => (Some(s), Some(c)),
        None => (None, None),
    };
    TailFit { replicas, points, slope, intercept, excluded, unresolved }
}

/// Ordinary least-squares line through `(x, y)` pairs: `(slope, intercept)`.
pub(crate) fn least_squares(xy: &[(f64, f64)]) -> Option<(f64, f64)> {
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
