//! Exact computations for nearest-neighbour chains on a finite interval.
//!
//! An [`IntervalChain`] lives on `[a, c]` and is described by a potential
//! `V` on `[a-1, c]`, normalized so that `V(a-1) = 0`; the right-step
//! probability at `x` is `ω_x = 1 / (1 + e^{V(x) - V(x-1)})`.

mod props;
mod solve;
mod spectral;

pub use props::{
    check_climb_bound, confinement_constants, ClimbCheck, ConfinementConstants, LowerConstant,
    OracleRow, UPoint, CLIMB_CONSTANT,
};
pub use solve::{
    exit_probability, hitting_time_tail, hitting_time_tail_with_budget, mean_by_tail_sum,
    mean_hitting_time, HittingTail, Survival, DEFAULT_BUDGET,
};
pub use spectral::{exact_spectral_gap, generator_spectral_gap, miclo_bound, MicloBound, MAX_EXACT_POINTS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("interval [{a}, {c}] needs at least four points")]
    TooShort { a: i64, c: i64 },
    #[error("expected {expected} potential values for [a-1, c], got {got}")]
    PotentialLength { expected: usize, got: usize },
    #[error("potential value at site {site} is not finite")]
    NonFinite { site: i64 },
    #[error("kernel override has {got} rows, expected {expected}")]
    KernelLength { expected: usize, got: usize },
    #[error("site {site} is outside [{a}, {c}]")]
    OutOfRange { site: i64, a: i64, c: i64 },
    #[error("target set is empty")]
    EmptyTarget,
    #[error("need a <= x <= b with a < b, got a = {a}, x = {x}, b = {b}")]
    Ordering { a: i64, x: i64, b: i64 },
    #[error("site {site} is outside the potential window")]
    Window { site: i64 },
    #[error("{points} points exceed the exact-solver cap of {cap}")]
    TooLarge { points: usize, cap: usize },
    #[error("linear system for mean hitting times is singular")]
    Singular,
    #[error("step budget of {budget} exhausted")]
    Budget { budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// The end points are absorbing.
    Absorbing,
    /// At `a` the chain stays put with probability `1 - ω_a`, at `c` with probability `ω_c`.
    Stay,
}

/// Transition row `[P(x→x-1), P(x→x), P(x→x+1)]`.
pub type KernelRow = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain", into = "RawChain")]
pub struct IntervalChain {
    a: i64,
    c: i64,
    /// `V(a-1), ..., V(c)`.
    v: Vec<f64>,
    boundary: BoundaryMode,
    kernel: Vec<KernelRow>,
    /// The kernel was supplied explicitly rather than derived from `V`.
    overridden: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    a: i64,
    c: i64,
    v: Vec<f64>,
    boundary: BoundaryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<Vec<KernelRow>>,
}

impl TryFrom<RawChain> for IntervalChain {
    type Error = ExactError;

    fn try_from(raw: RawChain) -> Result<Self, ExactError> {
        let chain = IntervalChain::new(raw.a, raw.c, raw.v, raw.boundary)?;
        match raw.kernel {
            Some(k) => chain.with_kernel(k),
            None => Ok(chain),
        }
    }
}

impl From<IntervalChain> for RawChain {
    fn from(chain: IntervalChain) -> Self {
        let kernel = if chain.overridden { Some(chain.kernel.clone()) } else { None };
        RawChain { a: chain.a, c: chain.c, v: chain.v, boundary: chain.boundary, kernel }
    }
}

/// Shape quantities of the potential on `[a, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainShape {
    pub h_plus: f64,
    pub h_minus: f64,
    /// `H₊ ∧ H₋`.
    pub h: f64,
    /// `H*₊ ∧ H*₋`, computed on `[a+1, c-1]`.
    pub h_star: f64,
    /// `max V - min V` on `[a, c]`.
    pub m_tilde: f64,
    /// Side of the easier exit: `c` if `H = H₊`, else `a`.
    pub f: i64,
    /// Leftmost minimizer of `V` on `[a, c]`.
    pub b: i64,
}

#[inline]
fn omega_from(v_prev: f64, v: f64) -> f64 {
    1.0 / (1.0 + (v - v_prev).exp())
}

impl IntervalChain {
    /// Chain on `[a, c]` from `V(a-1), ..., V(c)`; values are shifted so that `V(a-1) = 0`.
    pub fn new(a: i64, c: i64, v: Vec<f64>, boundary: BoundaryMode) -> Result<Self, ExactError> {
        if c - a < 3 {
            return Err(ExactError::TooShort { a, c });
        }
        let expected = (c - a + 2) as usize;
        if v.len() != expected {
            return Err(ExactError::PotentialLength { expected, got: v.len() });
        }
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(ExactError::NonFinite { site: a - 1 + k as i64 });
        }
        let base = v[0];
        let v: Vec<f64> = v.iter().map(|x| x - base).collect();
        let mut chain = Self { a, c, v, boundary, kernel: Vec::new(), overridden: false };
        chain.kernel = (a..=c).map(|x| chain.derived_row(x)).collect();
        Ok(chain)
    }

    /// Chain whose right-step probabilities are `omega[k]` at `a + k`.
    pub fn from_omegas(a: i64, omega: &[f64], boundary: BoundaryMode) -> Result<Self, ExactError> {
        let mut v = Vec::with_capacity(omega.len() + 1);
        v.push(0.0);
        for &w in omega {
            let last = *v.last().expect("non-empty");
            v.push(last + ((1.0 - w) / w).ln());
        }
        Self::new(a, a + omega.len() as i64 - 1, v, boundary)
    }

    /// Replace the derived kernel by explicit rows (no validation beyond shape).
    pub fn with_kernel(mut self, rows: Vec<KernelRow>) -> Result<Self, ExactError> {
        let expected = self.len();
        if rows.len() != expected {
            return Err(ExactError::KernelLength { expected, got: rows.len() });
        }
        self.kernel = rows;
        self.overridden = true;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chain serializes")
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn c(&self) -> i64 {
        self.c
    }

    /// Number of sites in `[a, c]`.
    pub fn len(&self) -> usize {
        (self.c - self.a + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    pub fn is_overridden(&self) -> bool {
        self.overridden
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.a && x <= self.c
    }

    /// `V(x)` for `x ∈ [a-1, c]`.
    #[inline]
    pub fn v(&self, x: i64) -> f64 {
        self.v[(x - self.a + 1) as usize]
    }

    /// Potential values `V(a-1), ..., V(c)`.
    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn omega(&self, x: i64) -> f64 {
        omega_from(self.v(x - 1), self.v(x))
    }

    /// `ln π(x) = ln(e^{-V(x)} + e^{-V(x-1)})`.
    pub fn ln_pi(&self, x: i64) -> f64 {
        crate::num::log_add_exp(-self.v(x), -self.v(x - 1))
    }

    pub fn pi(&self, x: i64) -> f64 {
        self.ln_pi(x).exp()
    }

    fn derived_row(&self, x: i64) -> KernelRow {
        let w = self.omega(x);
        let interior = [1.0 - w, 0.0, w];
        if x == self.a {
            match self.boundary {
                BoundaryMode::Absorbing => [0.0, 1.0, 0.0],
                BoundaryMode::Stay => [0.0, 1.0 - w, w],
            }
        } else if x == self.c {
            match self.boundary {
                BoundaryMode::Absorbing => [0.0, 1.0, 0.0],
                BoundaryMode::Stay => [1.0 - w, w, 0.0],
            }
        } else {
            interior
        }
    }

    #[inline]
    pub fn row(&self, x: i64) -> KernelRow {
        self.kernel[(x - self.a) as usize]
    }

    pub fn kernel(&self) -> &[KernelRow] {
        &self.kernel
    }

    /// First row that is not a probability vector: entries in `[0, 1]`, sum 1
    /// to within a few ulps, and no mass leaving the interval.
    pub fn check_rows(&self) -> Result<(), (i64, KernelRow)> {
        for x in self.a..=self.c {
            let r = self.row(x);
            let sum = r[0] + r[1] + r[2];
            let bad_entry = r.iter().any(|p| !(0.0..=1.0).contains(p));
            let leaks = (x == self.a && r[0] != 0.0) || (x == self.c && r[2] != 0.0);
            if bad_entry || leaks || (sum - 1.0).abs() > 4.0 * f64::EPSILON {
                return Err((x, r));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> ChainShape {
        let (a, c) = (self.a, self.c);
        let (h_plus, h_minus) = rises(self, a, c);
        let (hs_plus, hs_minus) = rises(self, a + 1, c - 1);
        let h = h_plus.min(h_minus);
        let vals = (a..=c).map(|x| self.v(x));
        let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.fold(f64::INFINITY, f64::min);
        let b = (a..=c).find(|&x| self.v(x) == min).expect("non-empty");
        ChainShape {
            h_plus,
            h_minus,
            h,
            h_star: hs_plus.min(hs_minus),
            m_tilde: max - min,
            f: if h == h_plus { c } else { a },
            b,
        }
    }

    /// The chain on `[a, c+1]` with `V(c+1) = V(b)` and stay boundaries.
    pub fn extended(&self) -> IntervalChain {
        let b = self.shape().b;
        let mut v = self.v.clone();
        v.push(self.v(b));
        IntervalChain::new(self.a, self.c + 1, v, BoundaryMode::Stay).expect("extension keeps a valid shape")
    }

    /// Same potential with another boundary mode.
    pub fn with_boundary(&self, boundary: BoundaryMode) -> IntervalChain {
        IntervalChain::new(self.a, self.c, self.v.clone(), boundary).expect("same shape")
    }
}

/// `(H₊, H₋)` of the potential restricted to `[lo, hi]`.
fn rises(chain: &IntervalChain, lo: i64, hi: i64) -> (f64, f64) {
    if lo > hi {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    let vals: Vec<f64> = (lo..=hi).map(|x| chain.v(x)).collect();
    let len = vals.len();
    // H₊ = max_x ( max_{[x,hi]} V - min_{[lo,x)} V )
    let mut suffix_max = vals.clone();
    for k in (0..len - 1).rev() {
        suffix_max[k] = suffix_max[k].max(suffix_max[k + 1]);
    }
    let mut h_plus = f64::NEG_INFINITY;
    let mut prefix_min = f64::INFINITY;
    for k in 0..len {
        if k > 0 {
            h_plus = h_plus.max(suffix_max[k] - prefix_min);
        }
        prefix_min = prefix_min.min(vals[k]);
    }
    // H₋ = max_x ( max_{[lo,x]} V - min_{(x,hi]} V )
    let mut suffix_min = vals.clone();
    for k in (0..len - 1).rev() {
        suffix_min[k] = suffix_min[k].min(suffix_min[k + 1]);
    }
    let mut h_minus = f64::NEG_INFINITY;
    let mut prefix_max = f64::NEG_INFINITY;
    for k in 0..len {
        prefix_max = prefix_max.max(vals[k]);
        if k + 1 < len {
            h_minus = h_minus.max(prefix_max - suffix_min[k + 1]);
        }
    }
    (h_plus, h_minus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sum_to_one_and_balance() {
        let v = vec![0.0, 1.5, -0.5, 2.0, 0.3, -1.0, 0.7];
        let chain = IntervalChain::new(2, 7, v, BoundaryMode::Stay).unwrap();
        chain.check_rows().unwrap();
        for x in 2..7 {
            let lhs = chain.omega(x) * chain.pi(x);
            let rhs = (1.0 - chain.omega(x + 1)) * chain.pi(x + 1);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
    }

    #[test]
    fn shape_of_single_well() {
        // V on [a-1, c] = 0 | 0 -1 -3 -1 2 1
        let chain = IntervalChain::new(0, 5, vec![0.0, 0.0, -1.0, -3.0, -1.0, 2.0, 1.0], BoundaryMode::Stay).unwrap();
        let s = chain.shape();
        assert_eq!(s.b, 2);
        assert_eq!(s.h_plus, 5.0);
        assert_eq!(s.h_minus, 3.0);
        assert_eq!(s.h, 3.0);
        assert_eq!(s.f, 0);
        assert_eq!(s.m_tilde, 5.0);
        assert!(s.h_star <= s.h && s.h <= s.m_tilde);
        let ext = chain.extended();
        assert_eq!(ext.c(), 6);
        assert_eq!(ext.v(6), -3.0);
    }

    #[test]
    fn json_round_trip_and_override() {
        let chain = IntervalChain::from_omegas(0, &[0.3, 0.6, 0.5, 0.8], BoundaryMode::Absorbing).unwrap();
        let back = IntervalChain::from_json(&chain.to_json()).unwrap();
        assert_eq!(back, chain);
        let broken = r#"{"a":0,"c":3,"v":[0,0,0,0,0],"boundary":"stay","kernel":[[0,0.5,0.5],[0.5,0,0.6],[0.5,0,0.5],[0.5,0.5,0]]}"#;
        let chain = IntervalChain::from_json(broken).unwrap();
        assert_eq!(chain.check_rows().unwrap_err().0, 1);
        assert!(IntervalChain::from_json(r#"{"a":0,"c":2,"v":[0,0,0,0],"boundary":"stay"}"#).is_err());
    }
}
