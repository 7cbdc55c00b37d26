use serde::{Deserialize, Serialize};

use super::{TrajectorySummary, WalkError};
use crate::env::Potential;
use crate::num::floor_site;
use crate::valleys::ValleyDecomposition;

/// Boundary sites seen by the embedded walk, sorted, with their valley indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    sites: Vec<i64>,
    indices: Vec<usize>,
    certified: Vec<bool>,
}

impl BoundarySet {
    /// `{K_i}` for the plain walk, `{K̃_i}` for the reflected one.
    pub fn new(dec: &ValleyDecomposition, reflected: bool) -> Self {
        let pairs: Vec<(usize, i64)> = if reflected {
            dec.reflected_boundaries()
        } else {
            dec.boundaries.iter().enumerate().map(|(i, b)| (i, b.site)).collect()
        };
        let certified = pairs.iter().map(|&(i, site)| site == 0 && reflected || dec.is_certified(i)).collect();
        let (indices, sites) = pairs.into_iter().unzip();
        Self { sites, indices, certified }
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Position of `site` in the sorted set.
    pub fn position(&self, site: i64) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    pub fn index_of(&self, site: i64) -> Option<usize> {
        self.position(site).map(|p| self.indices[p])
    }
}

/// The embedded walk up to `T = T_{⌊n^ν⌋}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedRecord {
    pub nu: f64,
    /// `⌊n^ν⌋`.
    pub level: i64,
    pub hit_time: Option<u64>,
    /// Set when the level was not reached within the retained path.
    pub partial: bool,
    pub reflected: bool,
    pub i0: usize,
    pub i1: usize,
    /// Clock times `s_0 < s_1 < ...` (all `≤ T`).
    pub times: Vec<u64>,
    /// Visited boundary sites `Y_0, Y_1, ...`.
    pub sites: Vec<i64>,
    /// Valley indices of `Y_j`.
    pub indices: Vec<usize>,
    /// `l = max { j : s_j ≤ T }`, absent when no boundary is visited.
    pub l: Option<usize>,
    /// `ξ(i)`: steps `K_{i+1} → K_i` of the embedded walk, indexed by `i`.
    pub xi: Vec<u64>,
    /// `𝔅 = Σ_{i=1}^{i₁-1} ξ(i)`.
    pub backtracks: u64,
    /// All left steps of the embedded walk, counted directly.
    pub left_steps: u64,
}

fn level_of(dec: &ValleyDecomposition, nu: f64) -> i64 {
    floor_site(dec.n.powf(nu))
}

/// Extract `(s_j, Y_j)` from the retained path of `traj`.
///
/// `s_0` is the first visit to a boundary site and `s_{j+1}` the first later
/// visit to a boundary site different from `Y_j`.
pub fn extract_embedded(dec: &ValleyDecomposition, traj: &TrajectorySummary, nu: f64) -> Result<EmbeddedRecord, WalkError> {
    let path = traj.path.as_ref().ok_or(WalkError::NoPath)?;
    let set = BoundarySet::new(dec, traj.reflected);
    let level = level_of(dec, nu);
    let i1 = dec.i1(nu);
    // The valley holding the level must be closed by a certified boundary.
    let above = set.sites.iter().position(|&s| s >= level);
    match above {
        Some(p) if set.certified[p] => {}
        _ => {
            return Err(WalkError::Decomposition(format!(
                "level {level} lies beyond the certified boundaries (edge {})",
                dec.certified_edge()
            )))
        }
    }
    let hit = path.iter().position(|&x| x as i64 == level);
    let end = hit.unwrap_or(path.len() - 1);

    let (mut times, mut sites, mut indices) = (Vec::new(), Vec::new(), Vec::new());
    let mut current: Option<usize> = None;
    for (t, &x) in path[..=end].iter().enumerate() {
        if let Some(p) = set.position(x as i64) {
            if current != Some(p) {
                current = Some(p);
                times.push(t as u64);
                sites.push(x as i64);
                indices.push(set.indices[p]);
            }
        }
    }

    let len = set.indices.last().map_or(0, |&i| i + 1);
    let mut xi = vec![0u64; len];
    let mut left_steps = 0;
    for w in indices.windows(2) {
        if w[1] < w[0] {
            left_steps += 1;
            if w[1] + 1 == w[0] {
                xi[w[1]] += 1;
            }
        }
    }
    let backtracks = xi.iter().enumerate().filter(|&(i, _)| i >= 1 && i < i1).map(|(_, c)| c).sum();
    Ok(EmbeddedRecord {
        nu,
        level,
        hit_time: hit.map(|t| t as u64),
        partial: hit.is_none(),
        reflected: traj.reflected,
        i0: dec.i0(),
        i1,
        l: times.len().checked_sub(1),
        times,
        sites,
        indices,
        xi,
        backtracks,
        left_steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Components {
    pub init: u64,
    pub dir: u64,
    pub back: u64,
    pub left: u64,
    pub right: u64,
}

impl Components {
    pub fn total(&self) -> u64 {
        self.init + self.dir + self.back + self.left + self.right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Init,
    Dir,
    Back,
    Left,
    Right,
}

impl Components {
    fn add(&mut self, tag: Tag, dt: u64) {
        match tag {
            Tag::Init => self.init += dt,
            Tag::Dir => self.dir += dt,
            Tag::Back => self.back += dt,
            Tag::Left => self.left += dt,
            Tag::Right => self.right += dt,
        }
    }
}

/// Split `[0, T)` into the five components.
///
/// Time before the first boundary visit is initial. A left step of the
/// embedded walk `K_{p+1} → K_p` is a backtrack, or a left excursion when
/// `K_p` is the lowest relevant boundary (`K_0`, or `0` when reflected); the
/// next right step `K_p → K_{p+1}` inherits its tag. Any other right step is
/// a first crossing: initial from the starting valley, direct up to `i₁ - 1`,
/// final afterwards. The last stretch from `s_l` to `T` is final.
pub fn decompose_hitting_time(
    dec: &ValleyDecomposition,
    traj: &TrajectorySummary,
    nu: f64,
) -> Result<Components, WalkError> {
    let rec = extract_embedded(dec, traj, nu)?;
    let t_hit = rec.hit_time.ok_or(WalkError::Censored { level: rec.level, steps: traj.steps })?;
    let mut out = Components::default();
    let Some(l) = rec.l else {
        out.init = t_hit;
        return Ok(out);
    };
    let set = BoundarySet::new(dec, traj.reflected);
    let start_index = if traj.reflected { set.indices[0] } else { rec.i0 };
    let left_index = if traj.reflected { set.indices[0] } else { 0 };

    out.init += rec.times[0];
    let mut pending: Vec<Option<Tag>> = vec![None; set.sites.len()];
    for j in 0..l {
        let dt = rec.times[j + 1] - rec.times[j];
        let from = set.position(rec.sites[j]).expect("embedded sites are boundaries");
        let to = set.position(rec.sites[j + 1]).expect("embedded sites are boundaries");
        let tag = if to < from {
            let tag = if rec.indices[j + 1] == left_index { Tag::Left } else { Tag::Back };
            pending[to] = Some(tag);
            tag
        } else {
            pending[from].take().unwrap_or({
                let p = rec.indices[j];
                if p <= start_index {
                    Tag::Init
                } else if p < rec.i1 {
                    Tag::Dir
                } else {
                    Tag::Right
                }
            })
        };
        out.add(tag, dt);
    }
    out.add(Tag::Right, t_hit - rec.times[l]);
    debug_assert_eq!(out.total(), t_hit);
    Ok(out)
}

/// `P^{K_i}[T_{K_{i-1}} < T_{K_{i+1}}] = Σ_{K_i}^{K_{i+1}-1} e^V / Σ_{K_{i-1}}^{K_{i+1}-1} e^V`.
pub fn crossing_probability(pot: &Potential, dec: &ValleyDecomposition, i: usize) -> Result<f64, WalkError> {
    if i == 0 {
        return Err(WalkError::Decomposition("crossing needs i ≥ 1".into()));
    }
    for k in [i - 1, i, i + 1] {
        if !dec.is_certified(k) {
            return Err(WalkError::Decomposition(format!("boundary K_{k} is missing or not certified")));
        }
    }
    let (lo, mid, hi) = (dec.boundaries[i - 1].site, dec.boundaries[i].site, dec.boundaries[i + 1].site);
    Ok((pot.ln_sum_exp_v(mid, hi - 1) - pot.ln_sum_exp_v(lo, hi - 1)).exp())
}
