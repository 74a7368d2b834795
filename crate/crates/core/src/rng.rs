//! Deterministic seeding.
//!
//! Every random draw in the harness goes through a ChaCha8 stream whose
//! 256-bit key is expanded from a 64-bit seed with SplitMix64. ChaCha is
//! counter-based, so a (key, stream) pair fixes the output on every platform
//! and independent of how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// ChaCha8 generator keyed by a SplitMix64 expansion of `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Substream for one design: `master_seed XOR fnv1a64(design_id)`.
pub fn design_stream(master_seed: u64, design_id: &str) -> ChaCha8Rng {
    stream(master_seed ^ fnv1a64(design_id.as_bytes()))
}

/// Substream number `index` under `seed` (e.g. one bootstrap replicate).
pub fn indexed_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = stream(seed);
    rng.set_stream(index);
    rng
}
