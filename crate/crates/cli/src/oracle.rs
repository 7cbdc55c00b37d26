//! Property sweep over random interval chains.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rwre_core::env::Potential;
use rwre_core::exact::{
    check_climb_bound, exact_spectral_gap, exit_probability, miclo_bound, BoundaryMode, IntervalChain, OracleRow,
};
use rwre_core::rng::{walk_rng, StreamDomain};
use serde::{Deserialize, Serialize};

use crate::{CliError, Config, OutputSet, Report, StreamAllocation};

const DEFAULT_INSTANCES: u64 = 100;
const MAX_POINTS: i64 = 30;
const MAX_ABS_V: f64 = 12.0;
const MAX_S: u64 = 1000;
const EXIT_TOL: f64 = 1e-10;
/// Slack for rounding in inequalities that may hold with equality.
const REL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub chain_id: String,
    pub quantity: String,
    pub detail: String,
    pub chain: IntervalChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// `pass`, `fail`, or `empty` when there was nothing to check.
    pub status: String,
    pub instances: u64,
    pub checks: usize,
    pub failures: usize,
    pub counterexamples: Vec<Counterexample>,
}

/// Chain on `[0, c]` with at most 30 points and i.i.d. uniform potential
/// values in `[-12, 12]`.
pub fn random_chain(rng: &mut ChaCha8Rng) -> IntervalChain {
    let c = rng.random_range(3..MAX_POINTS);
    let v = (0..c + 2).map(|_| rng.random_range(-MAX_ABS_V..=MAX_ABS_V)).collect();
    IntervalChain::new(0, c, v, BoundaryMode::Stay).expect("valid random chain")
}

/// `P^x[T_b < T_a]` by elimination on the harmonic equations of the walk
/// with right-step probabilities `omega[k]` at site `k`.
fn harmonic_exit(omega: &[f64], a: usize, x: usize, b: usize) -> f64 {
    let m = b - a + 1;
    // Row k: -(1-ω) h[k-1] + h[k] - ω h[k+1] = 0, with h[0] = 0 and h[m-1] = 1.
    let (mut diag, mut upper, mut rhs) = (vec![1.0; m], vec![0.0; m], vec![0.0; m]);
    rhs[m - 1] = 1.0;
    for k in 1..m - 1 {
        let w = omega[a + k];
        let lower = -(1.0 - w);
        diag[k] -= lower * upper[k - 1] / diag[k - 1];
        rhs[k] -= lower * rhs[k - 1] / diag[k - 1];
        upper[k] = -w;
    }
    let mut h = vec![0.0; m];
    h[m - 1] = rhs[m - 1] / diag[m - 1];
    for k in (0..m - 1).rev() {
        h[k] = (rhs[k] - upper[k] * h[k + 1]) / diag[k];
    }
    h[x - a]
}

fn three_sorted(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> [i64; 3] {
    let mut p = [rng.random_range(lo..=hi), rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
    p.sort_unstable();
    p
}

struct Sweep {
    rows: Vec<OracleRow>,
    counterexamples: Vec<Counterexample>,
}

impl Sweep {
    fn record(&mut self, chain: &IntervalChain, id: &str, quantity: &str, lhs: f64, rhs: f64, holds: bool, detail: String) {
        self.rows.push(OracleRow { chain_id: id.into(), quantity: quantity.into(), lhs, rhs, holds });
        if !holds {
            self.counterexamples.push(Counterexample {
                chain_id: id.into(),
                quantity: quantity.into(),
                detail,
                chain: chain.clone(),
            });
        }
    }

    fn check(&mut self, chain: &IntervalChain, id: &str, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
        if let Err((site, row)) = chain.check_rows() {
            let sum = row.iter().sum::<f64>();
            self.record(chain, id, "row-sum", sum, 1.0, false, format!("row at site {site} is {row:?}"));
            return Ok(());
        }
        let (a, c) = (chain.a(), chain.c());

        let lambda = exact_spectral_gap(chain)?;
        let mb = miclo_bound(chain);
        let ok = mb.lower <= lambda * (1.0 + REL_SLACK);
        self.record(chain, id, "miclo-lower", mb.lower, lambda, ok, format!("1/(4B) = {} > gap {lambda}", mb.lower));
        let ok = lambda <= mb.upper * (1.0 + REL_SLACK);
        self.record(chain, id, "miclo-upper", lambda, mb.upper, ok, format!("gap {lambda} > 2/B = {}", mb.upper));

        let [x, h, y] = three_sorted(rng, a, c);
        let s = rng.random_range(1..=MAX_S);
        let climb = check_climb_bound(chain, x, h, y, s)?;
        self.record(chain, id, "climb", climb.lhs, climb.rhs, climb.holds, format!("x = {x}, h = {h}, y = {y}, s = {s}"));

        // Exit probabilities on an environment with ω uniform in [0.05, 0.95].
        let len = rng.random_range(3..=MAX_POINTS as usize);
        let omega: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..0.95)).collect();
        let mut v = Vec::with_capacity(len);
        let mut acc = 0.0;
        for w in &omega {
            acc += ((1.0 - w) / w).ln();
            v.push(acc);
        }
        let pot = Potential::from_values(0, v, false);
        let lo = rng.random_range(0..len - 1);
        let hi = rng.random_range(lo + 1..len);
        let x = rng.random_range(lo..=hi);
        let exact = exit_probability(&pot, lo as i64, x as i64, hi as i64)?;
        let dense = harmonic_exit(&omega, lo, x, hi);
        let diff = (exact - dense).abs();
        self.record(chain, id, "exit-probability", diff, EXIT_TOL, diff <= EXIT_TOL, format!("omega = {omega:?}, a = {lo}, x = {x}, b = {hi}: {exact} vs {dense}"));
        Ok(())
    }
}

pub(crate) fn oracle_check(config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    let instances = config.run.instances.unwrap_or(DEFAULT_INSTANCES);
    let seed = config.run.seed;
    let mut sweep = Sweep { rows: Vec::new(), counterexamples: Vec::new() };
    for i in 0..instances {
        let mut rng = walk_rng(seed, StreamDomain::Calibration.stream(i));
        let chain = random_chain(&mut rng);
        sweep.check(&chain, &format!("random-{i}"), &mut rng)?;
    }
    for (k, chain) in config.run.chains.iter().enumerate() {
        let mut rng = walk_rng(seed, StreamDomain::Calibration.stream(instances + k as u64));
        sweep.check(chain, &format!("configured-{k}"), &mut rng)?;
    }

    let mut csv = format!("{}\n", OracleRow::CSV_HEADER);
    for r in &sweep.rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    out.write("oracle.csv", &csv)?;
    let failures = sweep.counterexamples.len();
    let status = if sweep.rows.is_empty() {
        "empty"
    } else if failures > 0 {
        "fail"
    } else {
        "pass"
    };
    let report = OracleReport {
        status: status.into(),
        instances: instances + config.run.chains.len() as u64,
        checks: sweep.rows.len(),
        failures,
        counterexamples: sweep.counterexamples,
    };
    out.write_json("report.json", &report)?;
    let mut notes = vec![format!("status: {status}")];
    let failure = (failures > 0).then(|| {
        let first = &report.counterexamples[0];
        CliError::Property(format!("{failures} failed checks; first: {} {} ({})", first.chain_id, first.quantity, first.detail))
    });
    if status == "empty" {
        notes.push("empty: no instances were checked".into());
    }
    Ok(Report {
        streams: vec![StreamAllocation {
            purpose: "chains".into(),
            seed,
            streams: "calibration stream i for instance i".into(),
        }],
        replicas: Some(instances),
        notes,
        partial: false,
        failure,
    })
}
