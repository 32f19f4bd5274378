//! Fan-out of a single root seed into named, mutually independent RNG
//! streams (data generation, model init, batch sampling, exploration).
//!
//! Consuming draws from one stream never perturbs another, so adding or
//! removing a consumer of, say, the epsilon stream leaves data generation
//! bit-identical.

use rand::rngs::StdRng;
use rand::SeedableRng;

/// Derive a child seed from the root seed and a stream name.
pub fn derive_seed(root: u64, stream: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer to decorrelate
    // nearby roots.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

/// A seeded RNG for the given stream.
pub fn stream_rng(root: u64, stream: &str) -> StdRng {
    StdRng::seed_from_u64(derive_seed(root, stream))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
