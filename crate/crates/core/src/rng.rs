//! Reproducible random streams.
//!
//! Two kinds of randomness are used:
//!
//! * environment sites are drawn from a counter-based hash keyed by
//!   `(seed, stream, site)`, so any window of an environment can be
//!   materialized in any order (or lazily, in chunks) with identical values;
//! * walk trajectories use a ChaCha8 generator whose 64-bit stream id selects
//!   an independent keystream for each replica.
//!
//! Stream ids are partitioned by [`StreamDomain`] so that environment,
//! walk and tail-sampling streams never collide.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Map 64 random bits to a uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Which part of a computation a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamDomain {
    Environment,
    Walk,
    PotentialTail,
    Calibration,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Environment => 1,
            StreamDomain::Walk => 2,
            StreamDomain::PotentialTail => 3,
            StreamDomain::Calibration => 4,
        }
    }

    /// Stream id for replica `index` within this domain.
    ///
    /// The top 16 bits carry the domain tag; `index` must fit in 48 bits.
    pub fn stream(self, index: u64) -> u64 {
        debug_assert!(index < (1 << 48));
        (self.tag() << 48) | index
    }
}

/// Counter-based generator: every `(seed, stream, counter)` triple maps to an
/// independent 64-bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteKey {
    key: u64,
}

impl SiteKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(seed.wrapping_add(GOLDEN) ^ mix64(stream.wrapping_mul(GOLDEN) ^ 0x5EED));
        Self { key }
    }

    #[inline]
    pub fn bits(&self, site: i64) -> u64 {
        mix64(self.key.wrapping_add((site as u64).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn uniform(&self, site: i64) -> f64 {
        unit_f64(self.bits(site))
    }
}

/// Sequential generator for one replica's trajectory.
pub fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
