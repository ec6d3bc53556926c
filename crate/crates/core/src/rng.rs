//! Seed derivation and independent random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by a 64-bit
//! seed and a stream id, so latents, edges and search restarts never share a
//! stream and replicates can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. Distinct purposes never draw from the same stream.
pub mod stream {
    pub const LATENTS: u64 = 1;
    pub const EDGES: u64 = 2;
    pub const SEARCH: u64 = 3;
    pub const ORACLE_SEARCH: u64 = 4;
    pub const ALIGNMENT: u64 = 5;
    pub const CHECKS: u64 = 6;
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for item `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
