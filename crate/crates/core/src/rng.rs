//! Deterministic RNG stream derivation.
//!
//! Every randomized stage derives an independent ChaCha stream from
//! `(seed, stream, index)`, so iterations can run in parallel and still
//! produce results that are byte-identical across thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream tags, one per randomized subsystem.
pub mod streams {
    pub const RANSAC: u64 = 0x5241_4e53;
    pub const FITTING: u64 = 0x4649_5454;
    pub const SYNTH: u64 = 0x5359_4e54;
}

/// splitmix64 finalizer; decorrelates consecutive inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for item `index` of stream `stream` under a user seed.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mixed = mix(seed ^ mix(stream ^ mix(index)));
    ChaCha8Rng::seed_from_u64(mixed)
}
