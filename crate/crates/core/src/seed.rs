//! Named sub-seeds derived from a single master seed.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from
//! `sub_seed(master, name)`, so there is no global generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a stable sub-seed for the stream called `name`.
pub fn sub_seed(master: u64, name: &str) -> u64 {
    // FNV-1a over the name
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(master ^ splitmix64(h))
}

/// Derives a sub-seed for the `index`-th member of a named family.
pub fn indexed_seed(master: u64, name: &str, index: u64) -> u64 {
    splitmix64(sub_seed(master, name) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, name))
}
