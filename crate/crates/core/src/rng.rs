//! Deterministic random streams.
//!
//! Every stochastic operation takes an explicit [`RngStream`]; there is no
//! global generator. Streams for individual samples are derived from
//! `(seed, sample index, epoch, purpose)` so results never depend on the order
//! in which samples are processed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Purpose tags that keep derived streams for different jobs disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Shuffle = 1,
    StrongView = 2,
    WeakView = 3,
    FundusAug = 4,
    Init = 5,
    Synth = 6,
    Corpus = 7,
}

/// Counter-based ChaCha stream with a recorded seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for one `(sample, epoch, purpose)` cell under a global seed.
    pub fn derive(global_seed: u64, index: u64, epoch: u64, purpose: Purpose) -> Self {
        let mut h = splitmix64(global_seed);
        h = splitmix64(h ^ index);
        h = splitmix64(h ^ epoch.rotate_left(17));
        h = splitmix64(h ^ (purpose as u64).rotate_left(41));
        Self::new(h)
    }

    /// Child stream keyed by `tag`, independent of how much of `self` was consumed.
    pub fn fork(&self, tag: u64) -> Self {
        Self::new(splitmix64(splitmix64(self.seed) ^ tag))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]`; returns `lo` when the range is collapsed.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.uniform();
        if hi <= lo {
            lo
        } else {
            lo + (hi - lo) * u
        }
    }

    /// Uniform integer in `0..n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let k = (self.uniform() * n as f64) as usize;
        k.min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        crate::math::sqrt(-2.0 * crate::math::ln(u1))
            * crate::math::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
