use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{EnvError, EnvironmentModel, SiteLaw};
use crate::rng::SiteKey;

const BETA_MAX_TRIES: usize = 1 << 20;

/// Draws ω for a single site from the model, given that site's key.
#[derive(Debug, Clone)]
pub enum SiteSampler {
    Discrete { values: Vec<f64>, cumulative: Vec<f64> },
    Beta { dist: Beta<f64>, lower: f64, upper: f64 },
}

impl SiteSampler {
    pub fn new(model: &EnvironmentModel) -> Self {
        match model.law() {
            SiteLaw::TwoPoint { atoms } | SiteLaw::FiniteSupport { atoms } => {
                let mut acc = 0.0;
                let mut cumulative: Vec<f64> = atoms
                    .iter()
                    .map(|a| {
                        acc += a.1;
                        acc
                    })
                    .collect();
                // Guard against the sum landing a few ulps short of 1.
                if let Some(last) = cumulative.last_mut() {
                    *last = f64::INFINITY;
                }
                SiteSampler::Discrete { values: atoms.iter().map(|a| a.0).collect(), cumulative }
            }
            SiteLaw::BetaTruncated { alpha, beta, lower, upper } => SiteSampler::Beta {
                dist: Beta::new(*alpha, *beta).expect("validated beta parameters"),
                lower: *lower,
                upper: *upper,
            },
        }
    }

    #[inline]
    pub fn draw(&self, key: &SiteKey, site: i64) -> f64 {
        match self {
            SiteSampler::Discrete { values, cumulative } => {
                let u = key.uniform(site);
                let k = cumulative.iter().position(|&c| u < c).unwrap_or(values.len() - 1);
                values[k]
            }
            SiteSampler::Beta { dist, lower, upper } => {
                let mut rng = ChaCha8Rng::seed_from_u64(key.bits(site));
                for _ in 0..BETA_MAX_TRIES {
                    let w = dist.sample(&mut rng);
                    if w >= *lower && w <= *upper {
                        return w;
                    }
                }
                // Truncation window of negligible mass: fall back to its midpoint.
                0.5 * (lower + upper)
            }
        }
    }
}

/// Provenance of a sampled environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

/// Realized environment on a finite window `[lo, hi]` containing 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    lo: i64,
    omega: Vec<f64>,
    reflected: bool,
    /// ω₀ before reflection, so the plain environment can be recovered.
    base_omega0: f64,
    seed_record: Option<SeedRecord>,
}

impl Environment {
    /// Plain environment with `omega[k]` at site `lo + k`.
    ///
    /// Values 0 and 1 are accepted (deterministic sites are useful in tests);
    /// they are rejected later by [`super::build_potential`] where they make
    /// the potential degenerate.
    pub fn new(lo: i64, omega: Vec<f64>) -> Result<Self, EnvError> {
        let hi = lo + omega.len() as i64 - 1;
        if lo > 0 || hi < 0 {
            return Err(EnvError::InvalidWindow { lo, hi });
        }
        for (k, &w) in omega.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(EnvError::InvalidOmega { site: lo + k as i64, value: w });
            }
        }
        let base_omega0 = omega[(-lo) as usize];
        Ok(Self { lo, omega, reflected: false, base_omega0, seed_record: None })
    }

    /// Constant environment ω ≡ w on `[lo, hi]`.
    pub fn constant(lo: i64, hi: i64, w: f64) -> Result<Self, EnvError> {
        if lo > hi {
            return Err(EnvError::InvalidWindow { lo, hi });
        }
        Self::new(lo, vec![w; (hi - lo + 1) as usize])
    }

    /// Copy with ω₀ forced to 1.
    pub fn reflect(&self) -> Self {
        let mut out = self.clone();
        if !out.reflected {
            out.base_omega0 = out.omega[(-out.lo) as usize];
            out.omega[(-out.lo) as usize] = 1.0;
            out.reflected = true;
        }
        out
    }

    /// Copy with the pre-reflection ω₀ restored.
    pub fn unreflected(&self) -> Self {
        let mut out = self.clone();
        if out.reflected {
            out.omega[(-out.lo) as usize] = out.base_omega0;
            out.reflected = false;
        }
        out
    }

    pub fn with_seed_record(mut self, record: SeedRecord) -> Self {
        self.seed_record = Some(record);
        self
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.omega.len() as i64 - 1
    }

    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    pub fn seed_record(&self) -> Option<SeedRecord> {
        self.seed_record
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    #[inline]
    pub fn omega(&self, x: i64) -> Option<f64> {
        let k = x.checked_sub(self.lo)?;
        if k < 0 {
            return None;
        }
        self.omega.get(k as usize).copied()
    }

    /// ω values in site order starting at `lo`.
    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    /// Binary-free export: a header line, then one `{"site","omega"}` line per site.
    pub fn to_jsonl(&self) -> String {
        let header = JsonlHeader {
            lo: self.lo,
            hi: self.hi(),
            reflected: self.reflected,
            omega0_plain: if self.reflected { Some(self.base_omega0) } else { None },
            seed: self.seed_record.map(|r| r.seed),
            stream: self.seed_record.map(|r| r.stream),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (k, &w) in self.omega.iter().enumerate() {
            let line = JsonlSite { site: self.lo + k as i64, omega: w };
            out.push_str(&serde_json::to_string(&line).expect("site serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EnvError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| EnvError::Parse("empty environment file".into()))?;
        let header: JsonlHeader =
            serde_json::from_str(first).map_err(|e| EnvError::Parse(format!("line 1: {e}")))?;
        if header.lo > 0 || header.hi < 0 {
            return Err(EnvError::InvalidWindow { lo: header.lo, hi: header.hi });
        }
        let len = header
            .hi
            .checked_sub(header.lo)
            .and_then(|d| d.checked_add(1))
            .filter(|&d| d > 0 && d <= 1 << 32)
            .ok_or(EnvError::InvalidWindow { lo: header.lo, hi: header.hi })?;
        let mut omega = Vec::with_capacity(len.min(1 << 20) as usize);
        for (idx, line) in lines {
            let site: JsonlSite = serde_json::from_str(line)
                .map_err(|e| EnvError::Parse(format!("line {}: {e}", idx + 1)))?;
            let expected = header.lo + omega.len() as i64;
            if site.site != expected {
                return Err(EnvError::Parse(format!(
                    "line {}: expected site {expected}, found {}",
                    idx + 1,
                    site.site
                )));
            }
            omega.push(site.omega);
            if omega.len() as i64 > len {
                return Err(EnvError::Parse(format!("line {}: site beyond hi = {}", idx + 1, header.hi)));
            }
        }
        if omega.len() as i64 != len {
            return Err(EnvError::Parse(format!(
                "expected {len} sites, found {}",
                omega.len()
            )));
        }
        let mut env = Environment::new(header.lo, omega)?;
        if header.reflected {
            if env.omega(0) != Some(1.0) {
                return Err(EnvError::Parse("reflected environment must have omega_0 = 1".into()));
            }
            if let Some(w) = header.omega0_plain {
                if !(0.0..=1.0).contains(&w) {
                    return Err(EnvError::InvalidOmega { site: 0, value: w });
                }
                env.omega[(-env.lo) as usize] = w;
            }
            env = env.reflect();
        }
        if let (Some(seed), Some(stream)) = (header.seed, header.stream) {
            env.seed_record = Some(SeedRecord { seed, stream });
        }
        Ok(env)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonlHeader {
    lo: i64,
    hi: i64,
    reflected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega0_plain: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    stream: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonlSite {
    site: i64,
    omega: f64,
}

/// i.i.d. environment on `[lo, hi]`, keyed by `(seed, stream, site)`.
pub fn sample_environment(
    model: &EnvironmentModel,
    lo: i64,
    hi: i64,
    seed: u64,
    stream: u64,
    reflected: bool,
) -> Result<Environment, EnvError> {
    if lo > 0 || hi < 0 {
        return Err(EnvError::InvalidWindow { lo, hi });
    }
    let sampler = SiteSampler::new(model);
    let key = SiteKey::new(seed, stream);
    let omega = (lo..=hi).map(|x| sampler.draw(&key, x)).collect();
    let env = Environment::new(lo, omega)?.with_seed_record(SeedRecord { seed, stream });
    Ok(if reflected { env.reflect() } else { env })
}

/// Anything a walk can query for ω at a site.
pub trait SiteField {
    /// ω at `x`, or `None` when `x` is not available.
    fn omega_at(&mut self, x: i64) -> Option<f64>;
}

impl SiteField for &Environment {
    #[inline]
    fn omega_at(&mut self, x: i64) -> Option<f64> {
        self.omega(x)
    }
}

impl SiteField for Environment {
    #[inline]
    fn omega_at(&mut self, x: i64) -> Option<f64> {
        self.omega(x)
    }
}

/// Environment sampled on demand, in chunks, as a walk explores it.
///
/// Values coincide with [`sample_environment`] for the same
/// `(seed, stream)` because draws are keyed by site.
#[derive(Debug, Clone)]
pub struct LazyEnvironment {
    sampler: SiteSampler,
    key: SiteKey,
    record: SeedRecord,
    reflected: bool,
    /// Sites 0, 1, 2, ...
    right: Vec<f64>,
    /// Sites -1, -2, ...
    left: Vec<f64>,
    chunk: usize,
}

impl LazyEnvironment {
    pub fn new(model: &EnvironmentModel, seed: u64, stream: u64, reflected: bool) -> Self {
        Self {
            sampler: SiteSampler::new(model),
            key: SiteKey::new(seed, stream),
            record: SeedRecord { seed, stream },
            reflected,
            right: Vec::new(),
            left: Vec::new(),
            chunk: 256,
        }
    }

    /// Re-key for another replica, keeping allocations.
    pub fn reset(&mut self, seed: u64, stream: u64) {
        self.key = SiteKey::new(seed, stream);
        self.record = SeedRecord { seed, stream };
        self.right.clear();
        self.left.clear();
    }

    fn grow_right(&mut self, upto: usize) {
        let target = (upto + 1).max(self.right.len() + self.chunk);
        for k in self.right.len()..target {
            self.right.push(self.sampler.draw(&self.key, k as i64));
        }
        if self.reflected {
            self.right[0] = 1.0;
        }
    }

    fn grow_left(&mut self, upto: usize) {
        let target = (upto + 1).max(self.left.len() + self.chunk);
        for k in self.left.len()..target {
            self.left.push(self.sampler.draw(&self.key, -(k as i64) - 1));
        }
    }

    /// Materialize `[lo, hi]` as an ordinary environment.
    pub fn snapshot(&mut self, lo: i64, hi: i64) -> Result<Environment, EnvError> {
        if lo > 0 || hi < 0 {
            return Err(EnvError::InvalidWindow { lo, hi });
        }
        let omega: Vec<f64> = (lo..=hi).map(|x| self.omega_at(x).expect("lazy sites always exist")).collect();
        let mut env = Environment::new(lo, omega)?.with_seed_record(self.record);
        if self.reflected {
            env.omega[(-lo) as usize] = self.sampler.draw(&self.key, 0);
            env = env.reflect();
        }
        Ok(env)
    }
}

impl SiteField for LazyEnvironment {
    #[inline]
    fn omega_at(&mut self, x: i64) -> Option<f64> {
        if x >= 0 {
            let k = x as usize;
            if k >= self.right.len() {
                self.grow_right(k);
            }
            Some(self.right[k])
        } else {
            let k = (-x - 1) as usize;
            if k >= self.left.len() {
                self.grow_left(k);
            }
            Some(self.left[k])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> EnvironmentModel {
        EnvironmentModel::two_point_rho([2.0, 0.5], [0.25, 0.75]).unwrap()
    }

    #[test]
    fn atom_frequencies_within_four_sigma() {
        let m = model();
        let env = sample_environment(&m, -500_000, 499_999, 11, 0, false).unwrap();
        let n = env.omegas().len() as f64;
        let low = env.omegas().iter().filter(|&&w| w < 0.5).count() as f64;
        let sigma = (n * 0.25 * 0.75).sqrt();
        assert!((low - 0.25 * n).abs() < 4.0 * sigma, "{low}");
    }

    #[test]
    fn reflection_and_determinism() {
        let m = model();
        let a = sample_environment(&m, -50, 50, 3, 9, true).unwrap();
        let b = sample_environment(&m, -50, 50, 3, 9, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.omega(0), Some(1.0));
        let plain = sample_environment(&m, -50, 50, 3, 9, false).unwrap();
        assert_eq!(a.unreflected(), plain);
    }

    #[test]
    fn lazy_matches_eager() {
        let m = model();
        let eager = sample_environment(&m, -700, 900, 5, 2, false).unwrap();
        let mut lazy = LazyEnvironment::new(&m, 5, 2, false);
        for x in [850, -3, 0, 899, -700, 17] {
            assert_eq!(lazy.omega_at(x), eager.omega(x));
        }
        assert_eq!(lazy.snapshot(-700, 900).unwrap(), eager);

        let mut lazy_r = LazyEnvironment::new(&m, 5, 2, true);
        assert_eq!(lazy_r.omega_at(0), Some(1.0));
        assert_eq!(lazy_r.snapshot(-10, 10).unwrap(), sample_environment(&m, -10, 10, 5, 2, true).unwrap());
    }

    #[test]
    fn jsonl_round_trip() {
        let m = model();
        for reflected in [false, true] {
            let env = sample_environment(&m, -4, 6, 1, 1, reflected).unwrap();
            let text = env.to_jsonl();
            assert_eq!(Environment::from_jsonl(&text).unwrap(), env);
        }
        assert!(Environment::from_jsonl("{\"lo\":1,\"hi\":3,\"reflected\":false}").is_err());
        let bad = "{\"lo\":0,\"hi\":1,\"reflected\":false}\n{\"site\":0,\"omega\":0.5}\n{\"site\":1,\"omega\":1.5}\n";
        assert!(matches!(Environment::from_jsonl(bad), Err(EnvError::InvalidOmega { site: 1, .. })));
    }

    #[test]
    fn beta_sites_are_in_bounds() {
        let m = EnvironmentModel::new(
            SiteLaw::BetaTruncated { alpha: 2.0, beta: 1.0, lower: 0.2, upper: 0.9 },
            false,
        )
        .unwrap();
        let env = sample_environment(&m, -100, 100, 0, 0, false).unwrap();
        assert!(env.omegas().iter().all(|&w| (0.2..=0.9).contains(&w)));
    }
}
