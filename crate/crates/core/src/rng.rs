//! Keyed counter-based streams.
//!
//! Every random quantity is addressed by `(master seed, domain, index)`:
//! the seed and domain label are hashed into a ChaCha20 key and the index
//! selects the ChaCha stream. Nothing is shared between jobs, so results do
//! not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::lattice::{Site, MAX_DIMENSION};

pub fn stream(seed: u64, domain: &str, index: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Injective code of a site of Z^d for coordinates with |x_j| < 2^20.
pub fn site_code(site: &Site) -> u64 {
    let mut code = 0u64;
    for (j, &c) in site.iter().enumerate().take(MAX_DIMENSION) {
        let z = zigzag(c);
        debug_assert!(z < (1 << 21), "coordinate {c} too large for site code");
        code |= z << (21 * j);
    }
    code
}

/// Uniform double in `[0, 1)` from the top 53 bits.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
