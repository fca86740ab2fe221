//! Seed derivation: every stochastic routine draws from a stream keyed by
//! `(seed, label)`, so adding a stage never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = splitmix(seed);
    for chunk in label.as_bytes().chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = splitmix(h ^ u64::from_le_bytes(buf));
    }
    splitmix(h ^ label.len() as u64)
}

pub fn stream(seed: u64, label: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, label))
}

/// Sub-stream `index` of a labelled stream, for sharded Monte Carlo.
pub fn shard(seed: u64, label: &str, index: usize) -> Rng {
    Rng::seed_from_u64(splitmix(derive_seed(seed, label) ^ splitmix(index as u64 + 1)))
}
