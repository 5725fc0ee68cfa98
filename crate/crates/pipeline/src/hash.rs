//! Git-style content hashing for self-describing run artifacts.

use sha2::{Digest, Sha256};

/// Hash of `blob {len}\0{bytes}`, hex-encoded. Stable across runs and
/// platforms, so manifests can assert byte-identical stage outputs.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
