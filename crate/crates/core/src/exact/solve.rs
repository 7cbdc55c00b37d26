use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ExactError, IntervalChain};
use crate::env::Potential;

/// Default cap on kernel applications.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// `P^x[T_b < T_a] = Σ_{y=a}^{x-1} e^{V(y)} / Σ_{y=a}^{b-1} e^{V(y)}`.
///
/// Returns 0 at `x = a` and 1 at `x = b`.
pub fn exit_probability(pot: &Potential, a: i64, x: i64, b: i64) -> Result<f64, ExactError> {
    if !(a < b && a <= x && x <= b) {
        return Err(ExactError::Ordering { a, x, b });
    }
    for site in [a, b - 1] {
        if !pot.contains(site) {
            return Err(ExactError::Window { site });
        }
    }
    if x == a {
        return Ok(0.0);
    }
    if x == b {
        return Ok(1.0);
    }
    Ok((pot.ln_sum_exp_v(a, x - 1) - pot.ln_sum_exp_v(a, b - 1)).exp())
}

/// Survival probabilities `P^x[T_S > t]` for every start `x`, advanced one
/// step at a time by the substochastic kernel with `S` killed.
#[derive(Debug, Clone)]
pub struct Survival<'a> {
    chain: &'a IntervalChain,
    target: Vec<bool>,
    v: Vec<f64>,
    scratch: Vec<f64>,
    t: u64,
}

impl<'a> Survival<'a> {
    pub fn new(chain: &'a IntervalChain, targets: &[i64]) -> Result<Self, ExactError> {
        if targets.is_empty() {
            return Err(ExactError::EmptyTarget);
        }
        let mut target = vec![false; chain.len()];
        for &s in targets {
            if !chain.contains(s) {
                return Err(ExactError::OutOfRange { site: s, a: chain.a(), c: chain.c() });
            }
            target[(s - chain.a()) as usize] = true;
        }
        let v: Vec<f64> = target.iter().map(|&t| if t { 0.0 } else { 1.0 }).collect();
        let scratch = v.clone();
        Ok(Self { chain, target, v, scratch, t: 0 })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    /// `P^x[T_S > t]` indexed by `x - a`.
    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, x: i64) -> f64 {
        self.v[(x - self.chain.a()) as usize]
    }

    pub fn step(&mut self) {
        let len = self.v.len();
        let kernel = self.chain.kernel();
        for k in 0..len {
            if self.target[k] {
                self.scratch[k] = 0.0;
                continue;
            }
            let [down, stay, up] = kernel[k];
            let mut s = stay * self.v[k];
            if k > 0 {
                s += down * self.v[k - 1];
            }
            if k + 1 < len {
                s += up * self.v[k + 1];
            }
            self.scratch[k] = s;
        }
        std::mem::swap(&mut self.v, &mut self.scratch);
        self.t += 1;
    }

    /// `max_x P^x[T_S > t]`.
    pub fn max(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingTail {
    /// `P^x[T_S > t]`, or the value at the last completed step when partial.
    pub probability: f64,
    pub steps: u64,
    /// `false` when the budget stopped the iteration before `t`.
    pub complete: bool,
}

/// `P^x[T_S > t]` with the default budget.
pub fn hitting_time_tail(chain: &IntervalChain, x: i64, targets: &[i64], t: u64) -> Result<HittingTail, ExactError> {
    hitting_time_tail_with_budget(chain, x, targets, t, DEFAULT_BUDGET)
}

pub fn hitting_time_tail_with_budget(
    chain: &IntervalChain,
    x: i64,
    targets: &[i64],
    t: u64,
    budget: u64,
) -> Result<HittingTail, ExactError> {
    if !chain.contains(x) {
        return Err(ExactError::OutOfRange { site: x, a: chain.a(), c: chain.c() });
    }
    let mut surv = Survival::new(chain, targets)?;
    let steps = t.min(budget);
    for _ in 0..steps {
        surv.step();
        // Once every start is absorbed further steps change nothing.
        if surv.max() == 0.0 {
            break;
        }
    }
    Ok(HittingTail { probability: surv.at(x), steps, complete: steps == t })
}

/// `E^x[T_S]` for every `x`, from the linear system `(I - Q) m = 1` on the
/// non-target sites.
pub fn mean_hitting_time(chain: &IntervalChain, targets: &[i64]) -> Result<Vec<f64>, ExactError> {
    let surv = Survival::new(chain, targets)?;
    let free: Vec<usize> = (0..chain.len()).filter(|&k| !surv.target[k]).collect();
    let mut pos = vec![usize::MAX; chain.len()];
    for (i, &k) in free.iter().enumerate() {
        pos[k] = i;
    }
    let m = free.len();
    let mut mat = DMatrix::<f64>::identity(m, m);
    for (i, &k) in free.iter().enumerate() {
        let [down, stay, up] = chain.kernel()[k];
        mat[(i, i)] -= stay;
        if k > 0 && pos[k - 1] != usize::MAX {
            mat[(i, pos[k - 1])] -= down;
        }
        if k + 1 < chain.len() && pos[k + 1] != usize::MAX {
            mat[(i, pos[k + 1])] -= up;
        }
    }
    let sol = mat.lu().solve(&DVector::from_element(m, 1.0)).ok_or(ExactError::Singular)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(ExactError::Singular);
    }
    let mut out = vec![0.0; chain.len()];
    for (i, &k) in free.iter().enumerate() {
        out[k] = sol[i];
    }
    Ok(out)
}

/// `E^x[T_S] = Σ_{t ≥ 0} P^x[T_S > t]`, summed until the geometric remainder
/// is below `1e-12` of the partial sum.
pub fn mean_by_tail_sum(chain: &IntervalChain, x: i64, targets: &[i64], budget: u64) -> Result<f64, ExactError> {
    if !chain.contains(x) {
        return Err(ExactError::OutOfRange { site: x, a: chain.a(), c: chain.c() });
    }
    let mut surv = Survival::new(chain, targets)?;
    let mut sum = 0.0;
    let mut history = [f64::NAN; 2];
    while surv.time() < budget {
        let p = surv.at(x);
        sum += p;
        let lead = surv.max();
        if lead == 0.0 {
            return Ok(sum);
        }
        // Two-step contraction ratio absorbs the period-2 structure.
        if history[0].is_finite() && history[0] > 0.0 {
            let r = (lead / history[0]).sqrt();
            if r < 1.0 {
                let remainder = lead / (1.0 - r);
                if remainder <= 1e-12 * sum {
                    return Ok(sum);
                }
            }
        }
        history = [history[1], lead];
        surv.step();
    }
    Err(ExactError::Budget { budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_potential, Environment};
    use crate::exact::BoundaryMode;

    #[test]
    fn symmetric_and_biased_ruin() {
        let env = Environment::constant(-2, 10, 0.5).unwrap();
        let pot = build_potential(&env).unwrap();
        assert!((exit_probability(&pot, 0, 3, 8).unwrap() - 3.0 / 8.0).abs() < 1e-15);
        assert_eq!(exit_probability(&pot, 0, 0, 8).unwrap(), 0.0);
        assert_eq!(exit_probability(&pot, 0, 8, 8).unwrap(), 1.0);

        let env = Environment::new(0, vec![0.5, 0.75, 0.75, 0.5]).unwrap();
        let pot = build_potential(&env).unwrap();
        assert!((exit_probability(&pot, 0, 1, 3).unwrap() - 9.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn two_step_survival() {
        let chain = IntervalChain::from_omegas(0, &[0.5; 5], BoundaryMode::Stay).unwrap();
        assert_eq!(hitting_time_tail(&chain, 2, &[0, 4], 0).unwrap().probability, 1.0);
        assert!((hitting_time_tail(&chain, 2, &[0, 4], 2).unwrap().probability - 0.5).abs() < 1e-15);
        let partial = hitting_time_tail_with_budget(&chain, 2, &[0, 4], 100, 10).unwrap();
        assert!(!partial.complete);
    }

    #[test]
    fn means_agree() {
        let chain = IntervalChain::new(0, 6, vec![0.0, 0.4, -0.8, -2.0, -0.5, 0.9, 0.2, 0.6], BoundaryMode::Stay).unwrap();
        let exact = mean_hitting_time(&chain, &[0, 6]).unwrap();
        for x in 1..6 {
            let tail = mean_by_tail_sum(&chain, x, &[0, 6], DEFAULT_BUDGET).unwrap();
            assert!((tail - exact[x as usize]).abs() <= 1e-8 * exact[x as usize], "{x}");
        }
        // Symmetric walk from 2 on [0, 4]: x (4 - x) = 4.
        let sym = IntervalChain::from_omegas(0, &[0.5; 5], BoundaryMode::Absorbing).unwrap();
        assert!((mean_hitting_time(&sym, &[0, 4]).unwrap()[2] - 4.0).abs() < 1e-12);
    }
}
