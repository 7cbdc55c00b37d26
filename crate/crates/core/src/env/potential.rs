use super::{EnvError, Environment};
use crate::num::{log_add_exp, log_sum_exp};

/// Potential `V` of an environment together with its reversible measure.
///
/// `V` is stored on `[lo - 1, hi]` where `[lo, hi]` is the environment window,
/// so `π(x) = e^{-V(x)} + e^{-V(x-1)}` is available on the whole window.
/// For a reflected environment `ρ₀ = 0`, so `V(-1) = +∞` and sites left of 0
/// are not represented.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    first: i64,
    values: Vec<f64>,
    reflected: bool,
    /// Prefix log-sums: `prefix[k] = ln Σ_{j < k} e^{V(first + j)}`.
    prefix_up: Vec<f64>,
}

/// Prefix sums of `ln ρ`, anchored at `V(0) = 0`.
pub fn build_potential(env: &Environment) -> Result<Potential, EnvError> {
    let reflected = env.is_reflected();
    let lo = if reflected { 0 } else { env.lo() };
    let hi = env.hi();
    let first = lo - 1;
    let mut values = vec![0.0; (hi - first + 1) as usize];
    let idx = |x: i64| (x - first) as usize;

    let ln_rho = |x: i64| -> Result<f64, EnvError> {
        let w = env.omega(x).expect("site in window");
        if w <= 0.0 || w >= 1.0 {
            return Err(EnvError::Degenerate { site: x, value: w });
        }
        Ok(((1.0 - w) / w).ln())
    };

    for x in 1..=hi {
        values[idx(x)] = values[idx(x - 1)] + ln_rho(x)?;
    }
    if reflected {
        values[idx(-1)] = f64::INFINITY;
    } else {
        // V(x-1) = V(x) - ln ρ_x, down to V(lo - 1).
        for x in (lo..=0).rev() {
            values[idx(x - 1)] = values[idx(x)] - ln_rho(x)?;
        }
    }
    Ok(Potential::from_values(first, values, reflected))
}

impl Potential {
    /// Potential given directly by its values `V(first), V(first+1), ...`.
    pub fn from_values(first: i64, values: Vec<f64>, reflected: bool) -> Self {
        let mut prefix_up = Vec::with_capacity(values.len() + 1);
        let mut acc = f64::NEG_INFINITY;
        prefix_up.push(acc);
        for &v in &values {
            acc = log_add_exp(acc, v);
            prefix_up.push(acc);
        }
        Self { first, values, reflected, prefix_up }
    }

    /// Smallest site with a stored value.
    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn last(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.first && x <= self.last()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V(x)`; panics outside `[first, last]`.
    #[inline]
    pub fn v(&self, x: i64) -> f64 {
        self.values[(x - self.first) as usize]
    }

    pub fn get(&self, x: i64) -> Option<f64> {
        if self.contains(x) {
            Some(self.v(x))
        } else {
            None
        }
    }

    /// `V(⌊x⌋)` for a real level.
    pub fn v_real(&self, x: f64) -> f64 {
        self.v(x.floor() as i64)
    }

    /// `ln π(x)`.
    #[inline]
    pub fn ln_pi(&self, x: i64) -> f64 {
        log_add_exp(-self.v(x), -self.v(x - 1))
    }

    pub fn pi(&self, x: i64) -> f64 {
        self.ln_pi(x).exp()
    }

    /// `ln π([x, y]) = ln Σ_{i=⌊x⌋-1}^{⌊y⌋} π(i)`.
    pub fn ln_pi_interval(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (x.floor() as i64 - 1, y.floor() as i64);
        log_sum_exp((a..=b).map(|i| self.ln_pi(i)))
    }

    /// `ln Σ_{y=a}^{b} e^{V(y)}` (`-∞` when `a > b`), in O(1).
    pub fn ln_sum_exp_v(&self, a: i64, b: i64) -> f64 {
        if a > b {
            return f64::NEG_INFINITY;
        }
        let (i, j) = ((a - self.first) as usize, (b - self.first) as usize + 1);
        let (hi, lo) = (self.prefix_up[j], self.prefix_up[i]);
        if lo == f64::NEG_INFINITY {
            return hi;
        }
        let diff = hi - lo;
        // Cancellation makes the subtraction inaccurate; sum directly instead.
        if diff < 1e-3 || !diff.is_finite() {
            return log_sum_exp(self.values[i..j].iter().copied());
        }
        hi + (-(-diff).exp_m1()).ln()
    }

    /// ω at `x` recovered from the potential: `e^{-V(x)} / π(x)`.
    pub fn omega(&self, x: i64) -> f64 {
        (-self.v(x) - self.ln_pi(x)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_environment_is_flat() {
        let env = Environment::constant(-5, 5, 0.5).unwrap();
        let p = build_potential(&env).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
        assert!((-5..=5).all(|x| (p.pi(x) - 2.0).abs() < 1e-15));
    }

    #[test]
    fn monotone_prefix_sum() {
        let env = Environment::constant(0, 5, 0.8).unwrap();
        let p = build_potential(&env).unwrap();
        assert!((p.v(5) - 5.0 * 0.25f64.ln()).abs() < 1e-12);
        assert!((p.v(5) + 6.9315).abs() < 1e-4);
        assert_eq!(p.v(0), 0.0);
        assert!((p.v(-1) + 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn reflected_potential_balances_at_origin() {
        let env = Environment::new(-2, vec![0.3, 0.6, 0.4, 0.7, 0.2]).unwrap().reflect();
        let p = build_potential(&env).unwrap();
        assert_eq!(p.first(), -1);
        assert_eq!(p.pi(0), 1.0);
        for x in 0..2 {
            let lhs = env.omega(x).unwrap() * p.pi(x);
            let rhs = (1.0 - env.omega(x + 1).unwrap()) * p.pi(x + 1);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
        }
    }

    #[test]
    fn degenerate_sites_are_rejected() {
        let env = Environment::constant(-2, 2, 1.0).unwrap();
        assert!(matches!(build_potential(&env), Err(EnvError::Degenerate { .. })));
    }

    #[test]
    fn prefix_sums_match_direct() {
        let omega: Vec<f64> = (0..40).map(|k| 0.2 + 0.6 * ((k * 37 % 11) as f64 / 10.0)).collect();
        let env = Environment::new(-20, omega).unwrap();
        let p = build_potential(&env).unwrap();
        for (a, b) in [(-21, 19), (-5, -5), (0, 10), (3, 18)] {
            let direct = log_sum_exp((a..=b).map(|y| p.v(y)));
            assert!((p.ln_sum_exp_v(a, b) - direct).abs() < 1e-12, "{a} {b}");
        }
    }
}
