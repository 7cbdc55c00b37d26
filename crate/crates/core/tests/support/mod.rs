//! Reference implementations used as oracles. They follow the definitions
//! literally and share no code with the library beyond plain data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwre_core::env::Environment;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Environment on `[lo, hi]` with i.i.d. uniform ω in `[wmin, wmax]`.
pub fn uniform_env(rng: &mut ChaCha8Rng, lo: i64, hi: i64, wmin: f64, wmax: f64) -> Environment {
    let omega = (lo..=hi).map(|_| rng.random_range(wmin..wmax)).collect();
    Environment::new(lo, omega).unwrap()
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `P^x[T_b < T_a]` from the harmonic equations on `[a, b]`.
pub fn dense_exit_probability(env: &Environment, a: i64, x: i64, b: i64) -> f64 {
    let m = (b - a + 1) as usize;
    let mut mat = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    mat[0][0] = 1.0;
    mat[m - 1][m - 1] = 1.0;
    rhs[m - 1] = 1.0;
    for k in 1..m - 1 {
        let w = env.omega(a + k as i64).unwrap();
        mat[k][k] = 1.0;
        mat[k][k + 1] = -w;
        mat[k][k - 1] = -(1.0 - w);
    }
    gauss_solve(mat, rhs)[(x - a) as usize]
}

/// Boundaries by the literal definition: `K_{i+1}` is the first `j ≥ K_i`
/// with `V(K_i) - min_{[K_i, j]} V ≥ θ` and `V(j) = max_{[j, last]} V`.
/// Returns `(site, certified)` with certification `V(j) - V(last) ≥ margin`
/// inherited left to right.
pub fn brute_boundaries(v: &[f64], first: i64, start: i64, theta: f64, margin: f64) -> Vec<(i64, bool)> {
    let at = |x: i64| v[(x - first) as usize];
    let last = first + v.len() as i64 - 1;
    let mut out = vec![(start, true)];
    let mut ok = true;
    let mut cur = start;
    'outer: loop {
        for j in cur..=last {
            let lowest = (cur..=j).map(at).fold(f64::INFINITY, f64::min);
            let highest = (j..=last).map(at).fold(f64::NEG_INFINITY, f64::max);
            if at(cur) - lowest >= theta && at(j) >= highest {
                ok = ok && at(j) - at(last) >= margin;
                out.push((j, ok));
                cur = j;
                continue 'outer;
            }
        }
        break;
    }
    out
}

/// Leftmost minimizer and `max_{k ≤ j} (V(j) - V(k))` on `[a, b)`.
pub fn brute_bottom_depth(v: &[f64], first: i64, a: i64, b: i64) -> (i64, f64) {
    let at = |x: i64| v[(x - first) as usize];
    let mut bottom = a;
    for x in a..b {
        if at(x) < at(bottom) {
            bottom = x;
        }
    }
    let mut depth = f64::NEG_INFINITY;
    for k in a..b {
        for j in k + 1..b {
            depth = depth.max(at(j) - at(k));
        }
    }
    (bottom, depth)
}

/// Law of `X_steps` from 0 by propagating the distribution, indexed by `x - lo`.
pub fn position_law(env: &Environment, steps: u64, reflected: bool) -> Vec<f64> {
    let (lo, hi) = (env.lo(), env.hi());
    let m = (hi - lo + 1) as usize;
    let mut p = vec![0.0; m];
    p[(-lo) as usize] = 1.0;
    for _ in 0..steps {
        let mut q = vec![0.0; m];
        for k in 0..m {
            if p[k] == 0.0 {
                continue;
            }
            let x = lo + k as i64;
            let w = if reflected && x == 0 { 1.0 } else { env.omega(x).unwrap() };
            q[k + 1] += w * p[k];
            if w < 1.0 {
                q[k - 1] += (1.0 - w) * p[k];
            }
        }
        p = q;
    }
    p
}

/// Embedded visits `(time, position in boundary list)` of `path` up to `end`.
fn embedded(path: &[i32], sites: &[i64], end: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (t, &x) in path[..=end].iter().enumerate() {
        if let Some(p) = sites.iter().position(|&s| s == x as i64) {
            if out.last().map(|&(_, q)| q) != Some(p) {
                out.push((t, p));
            }
        }
    }
    out
}

/// Number of left steps of the embedded walk before `level` is hit.
pub fn recount_backtracks(path: &[i32], sites: &[i64], level: i64) -> u64 {
    let end = path.iter().position(|&x| x as i64 == level).unwrap();
    let e = embedded(path, sites, end);
    e.windows(2).filter(|w| w[1].1 < w[0].1).count() as u64
}

/// Per-step tags `[init, dir, back, left, right]` of `[0, T)`.
///
/// `pairs` are `(valley index, site)` sorted by site, `start_index` the
/// index whose first crossing counts as initial, `left_index` the index whose
/// arrivals count as left excursions.
pub fn classify_steps(
    path: &[i32],
    pairs: &[(usize, i64)],
    level: i64,
    start_index: usize,
    left_index: usize,
    i1: usize,
) -> [u64; 5] {
    let sites: Vec<i64> = pairs.iter().map(|p| p.1).collect();
    let t_hit = path.iter().position(|&x| x as i64 == level).unwrap();
    let e = embedded(path, &sites, t_hit);
    let mut counts = [0u64; 5];
    // Tag of embedded step j, found by looking back for an unmatched arrival.
    let tag_of = |j: usize| -> usize {
        let (from, to) = (e[j].1, e[j + 1].1);
        let arrival_tag = |to: usize| if pairs[to].0 == left_index { 3 } else { 2 };
        if to < from {
            return arrival_tag(to);
        }
        for k in (0..j).rev() {
            let (f, t) = (e[k].1, e[k + 1].1);
            if f == from && t > f {
                break;
            }
            if t == from && f > t {
                return arrival_tag(from);
            }
        }
        let idx = pairs[from].0;
        if idx <= start_index {
            0
        } else if idx < i1 {
            1
        } else {
            4
        }
    };
    for t in 0..t_hit {
        let tag = match e.iter().rposition(|&(s, _)| s <= t) {
            None => 0,
            Some(j) if j + 1 == e.len() => 4,
            Some(j) => tag_of(j),
        };
        counts[tag] += 1;
    }
    counts
}

/// Wilson score interval.
pub fn wilson(k: u64, m: u64, z: f64) -> (f64, f64) {
    let (k, m) = (k as f64, m as f64);
    let p = k / m;
    let d = 1.0 + z * z / m;
    let c = (p + z * z / (2.0 * m)) / d;
    let h = z / d * (p * (1.0 - p) / m + z * z / (4.0 * m * m)).sqrt();
    (c - h, c + h)
}
