//! Seeding conventions.
//!
//! Two kinds of randomness streams are used:
//!
//! * per-edge streams for graph generation, derived from `(seed, u, v)` with
//!   SplitMix64 so that the presence and noise of an edge do not depend on
//!   the order pairs are visited;
//! * per-replicate walker streams, `ChaCha8Rng` keyed by the master seed with
//!   the replicate index as the stream id, so batches parallelize with
//!   reproducible per-replicate output.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// SplitMix64 step (Steele, Lea, Flood 2014). Used both as a mixer and as a
/// tiny per-edge generator.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A SplitMix64 stream keyed by an arbitrary tuple of integers.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn from_key(parts: &[u64]) -> Self {
        let mut state = 0x243F_6A88_85A3_08D3; // domain constant
        for &p in parts {
            state ^= splitmix64(&mut { state ^ p });
            let mut s = state.wrapping_add(p);
            state = splitmix64(&mut s);
        }
        SplitMix64 { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform double in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound`.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        // Cheap unbiased-enough sampling for the bounds used here (< 2^32).
        debug_assert!(bound > 0 && bound < (1 << 32));
        (self.next_u64() >> 16) % bound
    }
}

/// Stream for the unordered pair {u, v}. Symmetric in its node arguments.
pub fn edge_stream(seed: u64, u: usize, v: usize) -> SplitMix64 {
    let (a, b) = if u <= v { (u, v) } else { (v, u) };
    SplitMix64::from_key(&[seed, a as u64, b as u64])
}

/// Walker RNG for replicate `replicate` of a batch keyed by `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}
