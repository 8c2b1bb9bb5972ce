//! Seeded random streams.
//!
//! Every run owns one ChaCha8 key derived from its seed. The environment and
//! the agent read from different stream ids of that key, so the number of
//! draws an agent makes never shifts what the environment sees.
//!
//! All conversions from raw 64-bit words are spelled out here (53-bit
//! uniforms, `floor(u * n)` indices, cosine-branch Box–Muller) so the
//! sequences can be re-derived by any other implementation of ChaCha8.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;

/// A single deterministic random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal via Box–Muller, cosine branch only: two uniforms per draw.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// The pair of independent streams used by one protocol run.
#[derive(Debug, Clone)]
pub struct RunRng {
    pub env: Stream,
    pub agent: Stream,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        Self {
            env: Stream::new(seed, ENV_STREAM),
            agent: Stream::new(seed, AGENT_STREAM),
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one harness run: `mix64(mix64(mix64(base) ^ grid_index) ^ seed)`.
///
/// Only the run's own coordinates enter the hash, so appending grid points or
/// seeds leaves existing runs untouched.
pub fn run_seed(base_seed: u64, grid_index: u64, seed: u64) -> u64 {
    mix64(mix64(mix64(base_seed) ^ grid_index) ^ seed)
}
