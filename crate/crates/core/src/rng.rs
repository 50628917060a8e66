//! Counter-based random streams for reproducible, order-independent Monte Carlo.
//!
//! A [`StreamKey`] names a family of 2^63 independent ChaCha8 streams; stream
//! `i` is addressed directly, so trial `i` always sees the same numbers no
//! matter which thread evaluates it or in what order. Keys for unrelated
//! purposes are derived from a parent key with [`StreamKey::derive`].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::numerics::normal_quantile;

const DERIVE_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey(ChaCha8Rng::seed_from_u64(seed).get_seed())
    }

    /// Child key for `label`, drawn from a stream id reserved for derivation.
    pub fn derive(&self, label: u64) -> StreamKey {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(DERIVE_BIT | (label & !DERIVE_BIT));
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        StreamKey(key)
    }

    /// Stream number `index` (must be below 2^63).
    pub fn stream(&self, index: u64) -> RngStream {
        debug_assert!(
            index & DERIVE_BIT == 0,
            "stream index collides with derived keys"
        );
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index & !DERIVE_BIT);
        RngStream {
            key: *self,
            index,
            rng,
        }
    }
}

/// A seeded random stream. Not meant to be shared between concurrent callers;
/// split it instead.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey::from_seed(seed).stream(0)
    }

    /// Independent substream `index`. Depends only on this stream's identity,
    /// not on how much of it has been consumed.
    pub fn split(&self, index: u64) -> RngStream {
        self.key.derive(self.index).stream(index)
    }

    /// Uniform variate on the open interval (0, 1), 53 bits of resolution.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate by inversion, so that exactly one uniform is
    /// consumed per normal.
    pub fn next_standard_normal(&mut self) -> f64 {
        normal_quantile(self.next_uniform())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
