//! Seed lineage.
//!
//! Every random stream is derived from a master seed and a path of integer
//! labels (grid point, instance index, sample index, ...). The derivation is
//! a pure function, so serial and parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels used across the crate.
pub mod stream {
    pub const GRAPH: u64 = 0x6772_6170_6800;
    pub const HIDDEN: u64 = 0x6869_6464_656e;
    pub const SAMPLE: u64 = 0x7361_6d70_6c65;
    pub const RS_PMF: u64 = 0x7273_706d_6600;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a label path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// RNG for the stream identified by `master` and `path`.
pub fn rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}
