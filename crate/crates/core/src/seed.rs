use sha2::{Digest, Sha256};

/// Stable 64-bit seed for a named sub-task of a run.
///
/// The first eight bytes of `SHA-256(seed_le || key)` read little-endian.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
