use sha2::{Digest, Sha256};

/// Child seed for a named role: the first 8 bytes (little endian) of
/// `SHA-256(master.to_le_bytes() || tag)`.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}
