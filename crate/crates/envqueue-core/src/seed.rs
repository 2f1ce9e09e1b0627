//! Root-seed splitting.
//!
//! Every stochastic routine takes an explicit `u64` seed. Parallel replicas
//! derive their generators from a root seed by the documented rule
//!
//! ```text
//! key = SHA-256("envqueue.seed.v1" || root_le_bytes || stream_le_bytes)
//! rng = ChaCha12(key)
//! ```
//!
//! so results are independent of thread count and stable across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Deterministic RNG for a (root seed, stream index) pair.
pub fn replica_rng(root: u64, stream: u64) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(b"envqueue.seed.v1");
    h.update(root.to_le_bytes());
    h.update(stream.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}
