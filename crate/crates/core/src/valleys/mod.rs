//! Valley decomposition of a potential at time scale `n`.
//!
//! Boundaries are defined inductively from `K_0 = ⌊-n⌋`: `K_{i+1}` is the
//! first `j ≥ K_i` such that the potential has dropped by at least
//! `θ = 3/(1∧κ) · ln n` below `V(K_i)` somewhere on `[K_i, j]` and `V(j)`
//! dominates every later value. The second condition looks infinitely far
//! ahead; here it is checked on the finite window, and a boundary is
//! *certified* only when the window ends at least `θ + ln n` below `V(j)`.
//! Boundaries that fail this test, and all boundaries after them, are
//! reported as window-truncated.

mod events;
mod tail;

pub use events::{check_events, event_b, EnvEventReport, EventStatus, Witness};
pub use tail::{max_depth_tail, TailFit, TailPoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Potential;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValleyError {
    #[error("horizon n = {0} must be at least 2")]
    Horizon(f64),
    #[error("kappa = {0} must be positive and finite")]
    Kappa(f64),
    #[error("potential window [{first}, {last}] does not contain the start site {start}")]
    Window { first: i64, last: i64, start: i64 },
    #[error("decompose the plain potential; reflected boundaries are derived from it")]
    Reflected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryStatus {
    Certified,
    WindowTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub site: i64,
    pub status: BoundaryStatus,
}

/// The closed valley `[K_i, K_{i+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Valley {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    /// Leftmost minimizer of `V` on the valley.
    pub bottom: i64,
    /// Largest rise `max_{j<k} V(k) - V(j)` inside the valley; `-∞` for width 1.
    pub depth: f64,
    /// Both end points certified.
    pub certified: bool,
}

impl Valley {
    pub fn width(&self) -> i64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValleyDecomposition {
    pub n: f64,
    pub kappa: f64,
    /// Drop required inside a valley.
    pub threshold: f64,
    /// Extra drop demanded by the certification scan.
    pub margin: f64,
    /// Potential window `[first, last]` the decomposition was computed on.
    pub window: (i64, i64),
    pub boundaries: Vec<Boundary>,
    pub valleys: Vec<Valley>,
    pub diagnostic: Option<String>,
}

/// Valley threshold `3/(1∧κ) · ln n`.
pub fn valley_threshold(n: f64, kappa: f64) -> f64 {
    3.0 / kappa.min(1.0) * n.ln()
}

/// Decomposition with `K_0 = ⌊-n⌋`.
pub fn decompose(pot: &Potential, n: f64, kappa: f64) -> Result<ValleyDecomposition, ValleyError> {
    decompose_from(pot, (-n).floor() as i64, n, kappa)
}

/// Decomposition started at an arbitrary `K_0 = start`.
pub fn decompose_from(
    pot: &Potential,
    start: i64,
    n: f64,
    kappa: f64,
) -> Result<ValleyDecomposition, ValleyError> {
    if !(n >= 2.0) || !n.is_finite() {
        return Err(ValleyError::Horizon(n));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(ValleyError::Kappa(kappa));
    }
    if pot.is_reflected() {
        return Err(ValleyError::Reflected);
    }
    let (first, last) = (pot.first(), pot.last());
    if start < first || start > last {
        return Err(ValleyError::Window { first, last, start });
    }

    let threshold = valley_threshold(n, kappa);
    let margin = threshold + n.ln();
    let vals = &pot.values()[(start - first) as usize..];
    let at = |x: i64| vals[(x - start) as usize];
    let end_value = *vals.last().expect("non-empty window");

    // suffix_max[k] = max V on [start + k, last]
    let mut suffix_max = vals.to_vec();
    for k in (0..suffix_max.len().saturating_sub(1)).rev() {
        suffix_max[k] = suffix_max[k].max(suffix_max[k + 1]);
    }

    let mut boundaries = vec![Boundary { site: start, status: BoundaryStatus::Certified }];
    let mut truncated = false;
    let mut current = start;
    loop {
        let base = at(current);
        let mut running_min = base;
        let mut found = None;
        let mut dropped = false;
        for j in current..=last {
            let v = at(j);
            running_min = running_min.min(v);
            if !dropped && base - running_min >= threshold {
                dropped = true;
            }
            if dropped && v >= suffix_max[(j - start) as usize] {
                found = Some(j);
                break;
            }
        }
        let Some(j) = found else { break };
        truncated |= at(j) - end_value < margin;
        let status = if truncated { BoundaryStatus::WindowTruncated } else { BoundaryStatus::Certified };
        boundaries.push(Boundary { site: j, status });
        current = j;
    }

    let valleys = boundaries
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (a, b) = (pair[0].site, pair[1].site);
            let seg = &vals[(a - start) as usize..(b - start) as usize];
            let (bottom, depth) = bottom_and_depth(seg);
            Valley {
                index: i,
                start: a,
                end: b,
                bottom: a + bottom as i64,
                depth,
                certified: pair[1].status == BoundaryStatus::Certified,
            }
        })
        .collect::<Vec<_>>();

    let certified = boundaries.iter().filter(|b| b.status == BoundaryStatus::Certified).count();
    let diagnostic = if certified <= 1 {
        Some(format!(
            "no boundary after K_0 = {start} could be certified on [{first}, {last}] (threshold {threshold:.4}, margin {margin:.4})"
        ))
    } else {
        None
    };

    Ok(ValleyDecomposition {
        n,
        kappa,
        threshold,
        margin,
        window: (first, last),
        boundaries,
        valleys,
        diagnostic,
    })
}

/// Leftmost argmin and `max_{j<k} (V(k) - V(j))` of a valley segment.
fn bottom_and_depth(seg: &[f64]) -> (usize, f64) {
    let mut bottom = 0;
    let mut running_min = seg[0];
    let mut depth = f64::NEG_INFINITY;
    for (k, &v) in seg.iter().enumerate().skip(1) {
        depth = depth.max(v - running_min);
        if v < running_min {
            running_min = v;
            bottom = k;
        }
    }
    (bottom, depth)
}

/// Depth by the max–min form: `max_x ( max_{[x,end)} V - min_{[start,x)} V )`.
pub fn depth_max_min(seg: &[f64]) -> f64 {
    let len = seg.len();
    let mut suffix = seg.to_vec();
    for k in (0..len.saturating_sub(1)).rev() {
        suffix[k] = suffix[k].max(suffix[k + 1]);
    }
    let mut prefix_min = f64::INFINITY;
    let mut best = f64::NEG_INFINITY;
    for x in 0..len {
        if x > 0 {
            best = best.max(suffix[x] - prefix_min);
        }
        prefix_min = prefix_min.min(seg[x]);
    }
    best
}

impl ValleyDecomposition {
    pub fn boundary(&self, i: usize) -> Option<i64> {
        self.boundaries.get(i).map(|b| b.site)
    }

    pub fn boundary_sites(&self) -> Vec<i64> {
        self.boundaries.iter().map(|b| b.site).collect()
    }

    pub fn is_certified(&self, i: usize) -> bool {
        self.boundaries.get(i).is_some_and(|b| b.status == BoundaryStatus::Certified)
    }

    /// Number of certified boundaries (including `K_0`).
    pub fn certified_len(&self) -> usize {
        self.boundaries.iter().take_while(|b| b.status == BoundaryStatus::Certified).count()
    }

    /// Largest certified site, the right edge of the trustworthy region.
    pub fn certified_edge(&self) -> i64 {
        self.boundaries[self.certified_len() - 1].site
    }

    /// `N_n(m, m') = {i ≥ 1 : [K_i, K_{i+1}) ∩ [⌊m⌋, ⌊m'⌋) ≠ ∅}`.
    ///
    /// The valley after the last computed boundary is treated as unbounded.
    pub fn index_set(&self, m: f64, m_prime: f64) -> Vec<usize> {
        let (lo, hi) = (m.floor() as i64, m_prime.floor() as i64);
        (1..self.boundaries.len())
            .filter(|&i| {
                let start = self.boundaries[i].site;
                let end = self.boundaries.get(i + 1).map_or(i64::MAX, |b| b.site);
                start.max(lo) < end.min(hi)
            })
            .collect()
    }

    /// `i₀ = card N(-n, 0)`.
    pub fn i0(&self) -> usize {
        self.index_set(-self.n, 0.0).len()
    }

    /// `i₁ = card N(-n, n^ν)`.
    pub fn i1(&self, nu: f64) -> usize {
        self.index_set(-self.n, self.n.powf(nu)).len()
    }

    /// Boundaries seen by the walk reflected at the origin: `(i, K̃_i)` for
    /// `i ≥ i₀`, with `K̃_{i₀} = 0`.
    ///
    /// When `K_{i₀+1}` is itself 0 the two coincide and only `(i₀+1, 0)` is
    /// kept, so every site carries a single index.
    pub fn reflected_boundaries(&self) -> Vec<(usize, i64)> {
        let i0 = self.i0();
        let mut out = Vec::new();
        if self.boundary(i0 + 1) != Some(0) {
            out.push((i0, 0));
        }
        out.extend(self.boundaries.iter().enumerate().skip(i0 + 1).map(|(i, b)| (i, b.site)));
        out
    }

    /// Index of the closed valley containing `x`.
    pub fn valley_containing(&self, x: i64) -> Option<usize> {
        self.valleys.iter().position(|v| v.start <= x && x < v.end)
    }

    /// CSV with columns `i,K_i,b_i,H_i,certified`, one row per closed valley.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,K_i,b_i,H_i,certified\n");
        for v in &self.valleys {
            out.push_str(&format!("{},{},{},{},{}\n", v.index, v.start, v.bottom, v.depth, v.certified));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_potential, Environment};

    #[test]
    fn monotone_potential_gives_equal_widths() {
        let env = Environment::constant(-10, 200, 0.8).unwrap();
        let pot = build_potential(&env).unwrap();
        let n = std::f64::consts::E;
        let dec = decompose(&pot, n, 1.0).unwrap();
        assert_eq!(dec.boundary(0), Some(-3));
        let certified: Vec<i64> = dec.boundaries.iter().filter(|b| b.status == BoundaryStatus::Certified).map(|b| b.site).collect();
        assert!(certified.len() > 20);
        for w in certified.windows(2) {
            assert_eq!(w[1] - w[0], 3);
        }
        assert!(dec.valleys.iter().all(|v| v.bottom == v.end - 1 && (v.depth - 0.25f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn flat_potential_has_no_boundaries() {
        let env = Environment::constant(-50, 50, 0.5).unwrap();
        let pot = build_potential(&env).unwrap();
        let dec = decompose(&pot, 16.0, 0.7).unwrap();
        assert_eq!(dec.boundaries.len(), 1);
        assert!(dec.diagnostic.is_some());
    }

    #[test]
    fn index_sets() {
        let env = Environment::constant(-10, 200, 0.8).unwrap();
        let pot = build_potential(&env).unwrap();
        let dec = decompose(&pot, std::f64::consts::E, 1.0).unwrap();
        // K_i = -3 + 3i
        assert_eq!(dec.index_set(7.0, 8.0), vec![3]);
        assert_eq!(dec.index_set(3.0, 12.0), vec![2, 3, 4]);
        assert_eq!(dec.i0(), 0);
        assert_eq!(dec.i1(0.5), 1);
        assert_eq!(dec.reflected_boundaries()[..3], [(1, 0), (2, 3), (3, 6)]);
        let shifted = decompose_from(&pot, -5, std::f64::consts::E, 1.0).unwrap();
        assert_eq!(shifted.i0(), 1);
        assert_eq!(shifted.reflected_boundaries()[..2], [(1, 0), (2, 1)]);
    }

    #[test]
    fn depth_formulas_agree() {
        let seg = [0.0, -1.0, 0.5, -2.0, 1.0, 0.2];
        let (b, d) = bottom_and_depth(&seg);
        assert_eq!(b, 3);
        assert_eq!(d, 3.0);
        assert_eq!(depth_max_min(&seg), d);
        assert_eq!(depth_max_min(&[4.0]), f64::NEG_INFINITY);
    }
}
