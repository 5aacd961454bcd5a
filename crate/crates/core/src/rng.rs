//! Seed handling.
//!
//! Every stochastic step draws from a `ChaCha8Rng`, which produces the same
//! stream on every platform. Stage seeds are derived from one master seed by
//! hashing `master || label` with SHA-256 and keeping the first eight bytes
//! little-endian, so any stage can be re-run on its own and still see the
//! same randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from `parent` and a stage label.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
