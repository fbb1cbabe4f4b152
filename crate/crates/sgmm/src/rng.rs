//! Counter-based random-number streams.
//!
//! Stochastic steps are keyed by *what* they randomize rather than by draw
//! order: every (seed, domain, index, step) tuple maps to an independent
//! ChaCha8 generator. Per-datapoint streams therefore produce identical draws
//! no matter how work is chunked or how many workers run, which is what makes
//! parallel runs reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Each randomized subsystem owns one tag so that streams
/// never collide across purposes.
pub mod domain {
    /// Per-datapoint candidate-set initialisation and sampling.
    pub const DATAPOINT: u64 = 0x01;
    /// Centre seeding chains.
    pub const SEEDING: u64 = 0x02;
    /// Coreset index sampling.
    pub const CORESET: u64 = 0x03;
    /// Synthetic data generation.
    pub const SYNTHETIC: u64 = 0x04;
    /// Per-repetition master seeds inside an experiment.
    pub const REPETITION: u64 = 0x05;
    /// Baseline fits paired with an experiment repetition.
    pub const BASELINE: u64 = 0x06;
}

/// Factory for order-independent random streams derived from one 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for datapoint `n` at iteration `t`.
    pub fn for_datapoint(&self, n: usize, t: usize) -> ChaCha8Rng {
        self.stream(domain::DATAPOINT, n as u64, t as u64)
    }

    /// Generator for a whole subsystem (single sequential consumer).
    pub fn for_domain(&self, tag: u64) -> ChaCha8Rng {
        self.stream(tag, 0, 0)
    }

    /// Generator for the (domain, index, step) stream id.
    pub fn stream(&self, tag: u64, index: u64, step: u64) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(derive_key(self.seed, tag, index, step))
    }

    /// Derives a child seed, e.g. one per experiment repetition.
    pub fn child_seed(&self, tag: u64, index: u64) -> u64 {
        let mut state = self
            .seed
            .wrapping_add(tag.wrapping_mul(GOLDEN))
            .wrapping_add(index.wrapping_mul(WEYL));
        splitmix64(&mut state)
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const WEYL: u64 = 0xbf58_476d_1ce4_e5b9;

/// SplitMix64 step; a well-mixed 64 -> 64 bijection used for key expansion.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, tag: u64, index: u64, step: u64) -> [u8; 32] {
    let mut state = seed;
    // Absorb the stream id one word at a time before squeezing the key.
    splitmix64(&mut state);
    state ^= tag;
    splitmix64(&mut state);
    state ^= index;
    splitmix64(&mut state);
    state ^= step;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}
