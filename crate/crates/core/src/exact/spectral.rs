use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{ExactError, IntervalChain};
use crate::num::log_sum_exp;

/// Largest interval handled by the dense eigen oracles.
pub const MAX_EXACT_POINTS: usize = 64;

/// Miclo's two-sided estimate of the spectral gap of the continuous-time chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicloBound {
    pub b: f64,
    /// Minimizing site.
    pub argmin: i64,
    pub lower: f64,
    pub upper: f64,
    pub b_plus: Vec<f64>,
    pub b_minus: Vec<f64>,
}

/// Normalized reversible measure `μ = π / π([a, c])` of the stay chain.
fn mu(chain: &IntervalChain) -> Vec<f64> {
    let ln_pi: Vec<f64> = (chain.a()..=chain.c()).map(|x| chain.ln_pi(x)).collect();
    let total = log_sum_exp(ln_pi.iter().copied());
    ln_pi.iter().map(|l| (l - total).exp()).collect()
}

/// `B = min_i max(B₋(i), B₊(i))` over the chain's interval and the sandwich
/// `1/(4B) ≤ λ ≤ 2/B`.
///
/// `B₊(i) = max_{x>i} (Σ_{y=i+1}^{x} 1/(μ(y)(1-ω_y))) μ[x, end]` and
/// `B₋(i) = max_{x<i} (Σ_{y=x}^{i-1} 1/(μ(y)ω_y)) μ[start, x]`, with
/// `B₊(end) = B₋(start) = 0`.
pub fn miclo_bound(chain: &IntervalChain) -> MicloBound {
    let (a, len) = (chain.a(), chain.len());
    let mu = mu(chain);
    let omega: Vec<f64> = (0..len).map(|k| chain.omega(a + k as i64)).collect();

    let mut tail_mass = vec![0.0; len + 1];
    for k in (0..len).rev() {
        tail_mass[k] = tail_mass[k + 1] + mu[k];
    }
    let mut head_mass = vec![0.0; len + 1];
    for k in 0..len {
        head_mass[k + 1] = head_mass[k] + mu[k];
    }

    let mut b_plus = vec![0.0; len];
    for i in 0..len {
        let mut resistance = 0.0;
        let mut best = 0.0f64;
        for x in i + 1..len {
            resistance += 1.0 / (mu[x] * (1.0 - omega[x]));
            best = best.max(resistance * tail_mass[x]);
        }
        b_plus[i] = best;
    }
    let mut b_minus = vec![0.0; len];
    for i in 0..len {
        let mut resistance = 0.0;
        let mut best = 0.0f64;
        for x in (0..i).rev() {
            resistance += 1.0 / (mu[x] * omega[x]);
            best = best.max(resistance * head_mass[x + 1]);
        }
        b_minus[i] = best;
    }

    let (k, b) = (0..len)
        .map(|i| (i, b_plus[i].max(b_minus[i])))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    MicloBound { b, argmin: a + k as i64, lower: 1.0 / (4.0 * b), upper: 2.0 / b, b_plus, b_minus }
}

/// Spectral gap of the continuous-time stay chain (rates `ω_x` right,
/// `1-ω_x` left, no jumps out of the interval).
///
/// Computed as `1 / λ_max(M)` with
/// `M_{e,e'} = μ[start, e∧e'] μ[e∨e'+1, end] / sqrt(C_e C_{e'})`, where `e`
/// ranges over edges `(x, x+1)` with conductance `C_e = μ(x) ω_x`. `M` is the
/// variance form written in gradient coordinates, so its top eigenvalue is
/// the inverse gap; unlike the generator it keeps full relative accuracy
/// when the gap is tiny.
pub fn exact_spectral_gap(chain: &IntervalChain) -> Result<f64, ExactError> {
    let len = chain.len();
    if len > MAX_EXACT_POINTS {
        return Err(ExactError::TooLarge { points: len, cap: MAX_EXACT_POINTS });
    }
    let a = chain.a();
    let mu = mu(chain);
    let edges = len - 1;
    let mut head = vec![0.0; len + 1];
    for k in 0..len {
        head[k + 1] = head[k] + mu[k];
    }
    let mut tail = vec![0.0; len + 1];
    for k in (0..len).rev() {
        tail[k] = tail[k + 1] + mu[k];
    }
    let cond: Vec<f64> = (0..edges).map(|e| mu[e] * chain.omega(a + e as i64)).collect();
    let m = DMatrix::from_fn(edges, edges, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        head[lo + 1] * tail[hi + 1] / (cond[i] * cond[j]).sqrt()
    });
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(1.0 / top)
}

/// Spectral gap from a dense eigensolve of the symmetrized generator; only
/// accurate when the gap is not tiny compared to the largest eigenvalue.
pub fn generator_spectral_gap(chain: &IntervalChain) -> Result<f64, ExactError> {
    let len = chain.len();
    if len > MAX_EXACT_POINTS {
        return Err(ExactError::TooLarge { points: len, cap: MAX_EXACT_POINTS });
    }
    let a = chain.a();
    let omega: Vec<f64> = (0..len).map(|k| chain.omega(a + k as i64)).collect();
    let mut s = DMatrix::<f64>::zeros(len, len);
    for k in 0..len {
        let right = if k + 1 < len { omega[k] } else { 0.0 };
        let left = if k > 0 { 1.0 - omega[k] } else { 0.0 };
        s[(k, k)] = right + left;
        if k + 1 < len {
            let off = -(omega[k] * (1.0 - omega[k + 1])).sqrt();
            s[(k, k + 1)] = off;
            s[(k + 1, k)] = off;
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::BoundaryMode;

    #[test]
    fn symmetric_chain_gap_matches_closed_form() {
        // Rates 1/2 each way on 9 points with reflecting ends: λ = 1 - cos(π/9).
        let chain = IntervalChain::from_omegas(0, &[0.5; 9], BoundaryMode::Stay).unwrap();
        let expected = 1.0 - (std::f64::consts::PI / 9.0).cos();
        assert!((exact_spectral_gap(&chain).unwrap() - expected).abs() < 1e-12);
        assert!((generator_spectral_gap(&chain).unwrap() - expected).abs() < 1e-12);
        let m = miclo_bound(&chain);
        assert!(m.lower <= expected && expected <= m.upper);
    }

    #[test]
    fn shift_invariance() {
        let v = vec![0.0, 2.0, -1.0, 3.0, -4.0, 1.0, 0.5];
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.25).collect();
        let c1 = IntervalChain::new(0, 5, v, BoundaryMode::Stay).unwrap();
        let c2 = IntervalChain::new(0, 5, shifted, BoundaryMode::Stay).unwrap();
        let (m1, m2) = (miclo_bound(&c1), miclo_bound(&c2));
        assert!((m1.b - m2.b).abs() <= 1e-12 * m1.b);
        let (g1, g2) = (exact_spectral_gap(&c1).unwrap(), exact_spectral_gap(&c2).unwrap());
        assert!((g1 - g2).abs() <= 1e-12 * g1);
    }
}
