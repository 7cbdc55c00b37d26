use serde::{Deserialize, Serialize};

use super::ValleyDecomposition;
use crate::env::{Environment, Potential};

/// Outcome of evaluating one environment event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum EventStatus {
    Holds,
    Fails { witness: Witness },
    /// The answer depends on sites outside the window or on an unavailable input.
    Unknown { reason: String },
}

impl EventStatus {
    pub fn holds(&self) -> bool {
        matches!(self, EventStatus::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, EventStatus::Fails { .. })
    }

    fn unknown(reason: impl Into<String>) -> Self {
        EventStatus::Unknown { reason: reason.into() }
    }
}

/// Why an event fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    WideValley { index: usize, width: i64, limit: f64 },
    DeepValleys { a: f64, indices: Vec<usize>, depth_limit: f64, count_limit: f64 },
    Rise { from: i64, to: i64, rise: f64, limit: f64 },
    ShallowHalf { lo: i64, hi: i64, max_rise: f64, limit: f64 },
    Site { site: i64, one_minus_omega: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BEvent {
    pub a: f64,
    pub status: EventStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvEventReport {
    pub n: f64,
    pub nu: f64,
    pub m: usize,
    pub kappa: f64,
    pub epsilon0: Option<f64>,
    pub a: EventStatus,
    pub b: Vec<BEvent>,
    pub b_prime: EventStatus,
    pub g: EventStatus,
    pub g1: EventStatus,
    pub d: EventStatus,
    pub f: EventStatus,
}

impl EnvEventReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Maximal rises `max_{k ≥ i} V(k) - V(i)` computed on a finite window.
struct Rises<'a> {
    pot: &'a Potential,
    /// suffix_arg[k]: site of the (leftmost) maximum of V on [first + k, last].
    suffix_arg: Vec<i64>,
    margin: f64,
}

impl<'a> Rises<'a> {
    fn new(pot: &'a Potential, margin: f64) -> Self {
        let vals = pot.values();
        let mut suffix_arg = vec![pot.last(); vals.len()];
        for k in (0..vals.len().saturating_sub(1)).rev() {
            let cand = pot.first() + k as i64;
            let next = suffix_arg[k + 1];
            suffix_arg[k] = if vals[k] >= pot.v(next) { cand } else { next };
        }
        Self { pot, suffix_arg, margin }
    }

    /// `(argmax, rise)` over the window to the right of `i`.
    fn rise(&self, i: i64) -> (i64, f64) {
        let k = self.suffix_arg[(i - self.pot.first()) as usize];
        (k, self.pot.v(k) - self.pot.v(i))
    }

    /// Whether the potential beyond the window can be trusted never to climb
    /// back above `base + level`.
    fn tail_below(&self, base: f64, level: f64) -> bool {
        self.pot.v(self.pot.last()) + self.margin <= base + level
    }
}

fn rise_level(n: f64, kappa: f64) -> f64 {
    (n.ln() + 2.0 * n.ln().ln()) / kappa
}

/// `B(n, ν, a)`: fewer than `n^{ν-a}` valleys of `N(-n^ν, n^ν)` have depth at
/// least `(a/κ) ln n + ln ln n`.
pub fn event_b(dec: &ValleyDecomposition, nu: f64, a: f64) -> EventStatus {
    let n = dec.n;
    let depth_limit = a / dec.kappa * n.ln() + n.ln().ln();
    let count_limit = n.powf(nu - a);
    let set = dec.index_set(-n.powf(nu), n.powf(nu));
    let mut deep = Vec::new();
    let mut uncertain = false;
    for &i in &set {
        match dec.valleys.get(i) {
            Some(v) if v.certified => {
                if v.depth >= depth_limit {
                    deep.push(i);
                }
            }
            _ => uncertain = true,
        }
    }
    if deep.len() as f64 >= count_limit {
        EventStatus::Fails { witness: Witness::DeepValleys { a, indices: deep, depth_limit, count_limit } }
    } else if uncertain {
        EventStatus::unknown(format!("valleys of N(-n^nu, n^nu) extend past the certified edge {}", dec.certified_edge()))
    } else {
        EventStatus::Holds
    }
}

fn event_a(dec: &ValleyDecomposition) -> EventStatus {
    let n = dec.n;
    let limit = n.ln().powi(2);
    let imax = (2.0 * n).floor() as usize;
    for v in dec.valleys.iter().take(imax + 1) {
        if v.width() as f64 > limit {
            return if v.certified {
                EventStatus::Fails { witness: Witness::WideValley { index: v.index, width: v.width(), limit } }
            } else {
                EventStatus::unknown(format!("valley {} is wider than the limit but not certified", v.index))
            };
        }
        if !v.certified {
            return EventStatus::unknown(format!("valley {} is not certified", v.index));
        }
    }
    if dec.valleys.len() <= imax {
        return EventStatus::unknown(format!(
            "only {} valleys on the window, {} needed",
            dec.valleys.len(),
            imax + 1
        ));
    }
    EventStatus::Holds
}

fn event_g(rises: &Rises, n: f64, kappa: f64) -> EventStatus {
    let level = rise_level(n, kappa);
    let mut unknown = None;
    for site in [n.floor() as i64, (-n).floor() as i64] {
        if !rises.pot.contains(site) {
            return EventStatus::unknown(format!("site {site} is outside the potential window"));
        }
        let (to, rise) = rises.rise(site);
        if rise >= level {
            return EventStatus::Fails { witness: Witness::Rise { from: site, to, rise, limit: level } };
        }
        if !rises.tail_below(rises.pot.v(site), level) {
            unknown = Some(format!("rise from {site} may continue past the window"));
        }
    }
    unknown.map_or(EventStatus::Holds, EventStatus::unknown)
}

fn event_g1(rises: &Rises, n: f64, kappa: f64) -> EventStatus {
    let level = rise_level(n, kappa);
    let (lo, hi) = ((-n).floor() as i64, n.floor() as i64);
    if !rises.pot.contains(lo) || !rises.pot.contains(hi) {
        return EventStatus::unknown(format!("[{lo}, {hi}] is not inside the potential window"));
    }
    let mut lowest = f64::INFINITY;
    for i in lo..=hi {
        let (to, rise) = rises.rise(i);
        if rise > level {
            return EventStatus::Fails { witness: Witness::Rise { from: i, to, rise, limit: level } };
        }
        lowest = lowest.min(rises.pot.v(i));
    }
    if rises.tail_below(lowest, level) {
        EventStatus::Holds
    } else {
        EventStatus::unknown("rises may continue past the window")
    }
}

fn event_d(rises: &Rises, n: f64, kappa: f64) -> EventStatus {
    let level = (n.ln() - 4.0 * n.ln().ln()) / kappa;
    let (lo, hi) = ((-n).floor() as i64, n.floor() as i64);
    if !rises.pot.contains(lo) || !rises.pot.contains(hi) {
        return EventStatus::unknown(format!("[{lo}, {hi}] is not inside the potential window"));
    }
    let mut unknown = None;
    for (a, b) in [(0, hi), (lo, 0)] {
        let mut max_rise = f64::NEG_INFINITY;
        let mut lowest = f64::INFINITY;
        for i in a..=b {
            max_rise = max_rise.max(rises.rise(i).1);
            lowest = lowest.min(rises.pot.v(i));
        }
        if max_rise > level {
            continue;
        }
        if rises.tail_below(lowest, level) {
            return EventStatus::Fails {
                witness: Witness::ShallowHalf { lo: a, hi: b, max_rise, limit: level },
            };
        }
        unknown = Some(format!("no deep rise from [{a}, {b}] inside the window"));
    }
    unknown.map_or(EventStatus::Holds, EventStatus::unknown)
}

fn event_f(env: &Environment, n: f64, epsilon0: Option<f64>) -> EventStatus {
    let Some(eps) = epsilon0 else {
        return EventStatus::unknown("epsilon0 is not available");
    };
    let limit = n.powf(-3.0 / eps);
    let (lo, hi) = ((-n).floor() as i64, n.floor() as i64);
    if !env.contains(lo) || !env.contains(hi) {
        return EventStatus::unknown(format!("[{lo}, {hi}] is not inside the environment window"));
    }
    let (site, q) = (lo..=hi)
        .map(|x| (x, 1.0 - env.omega(x).expect("in window")))
        .fold((lo, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    if q > limit {
        EventStatus::Holds
    } else {
        EventStatus::Fails { witness: Witness::Site { site, one_minus_omega: q, limit } }
    }
}

/// Evaluate the environment events at the decomposition's horizon.
///
/// `env` and `pot` are the plain (unreflected) environment and its potential.
pub fn check_events(
    env: &Environment,
    pot: &Potential,
    dec: &ValleyDecomposition,
    nu: f64,
    m: usize,
    epsilon0: Option<f64>,
) -> EnvEventReport {
    let (n, kappa) = (dec.n, dec.kappa);
    let rises = Rises::new(pot, dec.margin);

    let b: Vec<BEvent> = (1..m)
        .map(|k| {
            let a = k as f64 * nu / m as f64;
            BEvent { a, status: event_b(dec, nu, a) }
        })
        .collect();
    let b_prime = b
        .iter()
        .find(|e| e.status.fails())
        .or_else(|| b.iter().find(|e| matches!(e.status, EventStatus::Unknown { .. })))
        .map_or(EventStatus::Holds, |e| e.status.clone());

    EnvEventReport {
        n,
        nu,
        m,
        kappa,
        epsilon0,
        a: event_a(dec),
        b,
        b_prime,
        g: event_g(&rises, n, kappa),
        g1: event_g1(&rises, n, kappa),
        d: event_d(&rises, n, kappa),
        f: event_f(env, n, epsilon0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_potential;
    use crate::valleys::decompose;

    #[test]
    fn monotone_environment_has_narrow_valleys() {
        let n = 16.0;
        let env = Environment::constant(-20, 400, 0.8).unwrap();
        let pot = build_potential(&env).unwrap();
        let dec = decompose(&pot, n, 1.0).unwrap();
        let r = check_events(&env, &pot, &dec, 0.5, 3, Some(1.0));
        assert!(r.a.holds(), "{:?}", r.a);
        assert!(r.g.holds() && r.g1.holds(), "{:?} {:?}", r.g, r.g1);
        assert!(r.f.holds());
        assert!(r.b_prime.holds(), "{:?}", r.b_prime);
    }

    #[test]
    fn near_deterministic_site_breaks_f() {
        let n: f64 = 64.0;
        let eps0 = 2.0;
        let mut omega = vec![0.7; 401];
        let q = n.powf(-4.0 / eps0) / 2.0;
        omega[200 + 17] = 1.0 - q;
        let env = Environment::new(-200, omega).unwrap();
        let pot = build_potential(&env).unwrap();
        let dec = decompose(&pot, n, 1.0).unwrap();
        let r = check_events(&env, &pot, &dec, 0.5, 2, Some(eps0));
        match r.f {
            EventStatus::Fails { witness: Witness::Site { site, .. } } => assert_eq!(site, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_window_is_unknown() {
        let env = Environment::constant(-20, 30, 0.8).unwrap();
        let pot = build_potential(&env).unwrap();
        let dec = decompose(&pot, 16.0, 1.0).unwrap();
        let r = check_events(&env, &pot, &dec, 0.5, 3, Some(1.0));
        assert!(matches!(r.a, EventStatus::Unknown { .. }));
    }
}
