//! Hierarchical seeded random streams.
//!
//! Every stochastic component draws from its own substream derived from the
//! run's root seed and a path string, so enabling parallel evaluation or
//! reordering independent components cannot change results.
//!
//! Derivation scheme (stable, documented): the ChaCha8 key is
//! `SHA-256("covs/v1/" || root_seed_le_bytes || "/" || path)`. Child seeds for
//! nested components are the first 8 bytes of that digest, little-endian.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const SCHEME_TAG: &[u8] = b"covs/v1/";

fn digest(root_seed: u64, path: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(SCHEME_TAG);
    hasher.update(root_seed.to_le_bytes());
    hasher.update(b"/");
    hasher.update(path.as_bytes());
    hasher.finalize().into()
}

/// Deterministic substream for `(root_seed, path)`.
pub fn substream(root_seed: u64, path: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(root_seed, path))
}

/// Derives a child root seed, for components that seed their own substreams.
pub fn derive_seed(root_seed: u64, path: &str) -> u64 {
    let d = digest(root_seed, path);
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
