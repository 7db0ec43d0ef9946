//! Seeded stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by a
//! master seed plus a path of integers (replication, experiment, purpose...).
//! ChaCha is a counter-based generator, so a stream is fully determined by its
//! key and stream id: two tasks never share state and results do not depend
//! on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream-purpose tags. Keeping them distinct decouples, e.g., the ATE draws
/// from the noise draws so changing `N` leaves the sampled `tau_k` untouched.
pub mod tag {
    pub const ATE: u64 = 0x4154_45;
    pub const EXPERIMENT: u64 = 0x4558_50;
    pub const COEFF: u64 = 0x434f_45;
    pub const ROWS: u64 = 0x524f_57;
    pub const ORACLE: u64 = 0x4f52_41;
    pub const FOLDS: u64 = 0x464f_4c;
    pub const NUISANCE: u64 = 0x4e55_49;
    pub const REPLICATION: u64 = 0x5245_50;
    pub const SUBSAMPLE: u64 = 0x5355_42;
    pub const GROUPING: u64 = 0x4752_50;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of integers into a single 64-bit value.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Opens the stream addressed by `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(derive_seed(seed, path));
    rng
}
