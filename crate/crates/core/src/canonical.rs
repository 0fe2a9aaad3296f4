//! Canonical byte encoding for everything that gets hashed.
//!
//! Hashing requires byte-exactness, so every hash preimage in the engine is
//! built from the same field-order-fixed, length-prefixed binary layout:
//!
//! - unsigned integers are big-endian (`u32` 4 bytes, `u64` 8 bytes)
//! - signed timestamps are big-endian two's-complement `i64`
//! - strings are UTF-8 bytes prefixed with their `u32` byte length
//! - byte blobs are prefixed with their `u32` length
//! - fixed-width fields (32-byte digests, 64-byte signatures, one-byte tags)
//!   are written raw, with no prefix
//! - optional fields are a one-byte presence flag (`0` absent, `1` present)
//!   followed by the encoding when present
//!
//! Length prefixes make the encoding injective: distinct field tuples can
//! never serialize to the same byte string.

use sha2::{Digest, Sha256};

/// Accumulates the canonical encoding of one hash preimage.
#[derive(Debug, Default)]
pub struct CanonicalWriter {
    buf: Vec<u8>,
}

impl CanonicalWriter {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Length-prefixed UTF-8 string.
    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    /// Length-prefixed byte blob.
    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
        self
    }

    /// Fixed-width field, written raw without a prefix.
    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }

    /// SHA-256 over the accumulated encoding.
    pub fn finish_sha256(self) -> [u8; 32] {
        sha256(&self.buf)
    }
}

/// SHA-256 digest of a byte slice.
pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}

/// Lowercase hex of a digest, the form used in every JSON surface.
pub fn to_hex(bytes: &[u8]) -> String {
    hex::encode(bytes)
}

/// Parses a 32-byte digest from lowercase or uppercase hex.
pub fn digest_from_hex(s: &str) -> Option<[u8; 32]> {
    let raw = hex::decode(s).ok()?;
    raw.try_into().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_prefix_keeps_adjacent_strings_apart() {
        let mut a = CanonicalWriter::new();
        a.str("ab").str("c");
        let mut b = CanonicalWriter::new();
        b.str("a").str("bc");
        assert_ne!(a.into_bytes(), b.into_bytes());
    }

    #[test]
    fn sha256_matches_known_vector() {
        // FIPS 180-2 appendix B.1
        assert_eq!(
            to_hex(&sha256(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = sha256(b"round trip");
        assert_eq!(digest_from_hex(&to_hex(&d)), Some(d));
        assert_eq!(digest_from_hex("zz"), None);
        assert_eq!(digest_from_hex("aabb"), None); // wrong length
    }
}
