//! Reproducible stream-splittable random numbers.
//!
//! Every stochastic object in this crate is a pure function of a
//! `(master seed, stream index)` pair. Monte Carlo path `i` always uses
//! stream `base + i`, and ensemble reductions run in index order, so the
//! thread count never changes any output byte.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Master seed plus a stream index; together they determine a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { master: self.master, stream }
    }

    pub fn offset(self, delta: u64) -> Self {
        Self { master: self.master, stream: self.stream.wrapping_add(delta) }
    }

    /// Generator for this (seed, stream) pair.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

/// Stream offsets keeping independent ensembles far apart.
pub mod stream_block {
    pub const PRIMARY: u64 = 0;
    pub const SECONDARY: u64 = 1 << 32;
    pub const TERTIARY: u64 = 2 << 32;
    pub const AUX: u64 = 3 << 32;
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    rng.random_range(lo..hi)
}

/// Maps `0..n` in parallel and returns results in index order.
pub fn par_map_ordered<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Mean and standard error accumulated in index order.
pub fn par_mean_se<F>(n: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let samples = par_map_ordered(n, f);
    crate::numerics::stats::mean_se(&samples)
}
