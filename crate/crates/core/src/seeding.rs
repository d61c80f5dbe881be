//! Deterministic seed derivation: one base seed expands into disjoint
//! streams for agent initialization, rollouts and evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for agent weight initialization.
pub const STREAM_AGENT_INIT: u64 = 0;

/// SplitMix64 mix of a base seed with a stream tag.
pub fn subseed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded generator for a derived stream.
pub fn rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(base, stream))
}
