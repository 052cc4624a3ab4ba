//! Cryptographic primitives behind stable contracts: SHA-256 hashing,
//! HMAC-SHA-256 tags, AES-256-GCM sealing, Argon2id memory-hard derivation,
//! Ed25519 signing, a software platform root standing in for hardware
//! attestation, and a persisted monotonic counter for rollback defense.
//!
//! Everything here is deterministic given its inputs; randomness enters only
//! through explicitly passed RNGs at key generation.

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::wire::WireError;

pub mod counter;
pub mod keys;
pub mod mhd;
pub mod platform;
pub mod seal;

pub use counter::MonotonicCounter;
pub use keys::{KeyPair, PublicKey, SignatureBytes};
pub use mhd::{memory_hard_derive, MemoryHardParams};
pub use platform::{AttestationQuote, PlatformRoot};
pub use seal::{counter_nonce, seal, unseal, SealKey, SealedBlob};

/// Domain-separation prefixes. Every derived key or tagged hash that is not
/// pinned byte-for-byte by the chain format uses a distinct constant here so
/// no two uses of the same primitive can collide.
pub mod domains {
    pub const GENESIS: &[u8] = b"procat.v1.genesis";
    pub const SWF_INIT: &[u8] = b"procat.v1.swf.init";
    pub const SWF_SALT: &[u8] = b"procat.v1.swf.salt";
    pub const CDCE_KEY: &[u8] = b"procat.v1.cdce.key";
    pub const CHANNEL_KEY: &[u8] = b"procat.v1.channel.key";
    pub const BATCH_MAC: &[u8] = b"procat.v1.batch";
    pub const SEAL_KEY: &[u8] = b"procat.v1.seal.key";
    pub const COUNTER_MAC: &[u8] = b"procat.v1.counter";
    pub const MEASUREMENT: &[u8] = b"procat.v1.measurement";
    pub const QUOTE: &[u8] = b"procat.v1.quote";
    pub const REQUOTE_NONCE: &[u8] = b"procat.v1.requote.nonce";
    pub const MERKLE_LEAF: &[u8] = &[0x00];
    pub const MERKLE_NODE: &[u8] = &[0x01];
}

#[derive(Debug, Error)]
pub enum CryptoError {
    /// AEAD open failed or a MAC did not verify: tampering, wrong key, or
    /// wrong associated data.
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("memory-hard derivation could not allocate its working memory")]
    InsufficientMemory,
    #[error("persistence failure: {0}")]
    Persistence(#[from] std::io::Error),
    #[error("malformed encoding: {0}")]
    Encoding(#[from] WireError),
}

pub const DIGEST_LEN: usize = 32;
pub const MAC_LEN: usize = 32;

/// 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "hex_array")] pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let v = hex::decode(s).ok()?;
        let arr: [u8; DIGEST_LEN] = v.try_into().ok()?;
        Some(Digest(arr))
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// 32-byte HMAC-SHA-256 tag. Equality on tags is not constant time; use
/// [`mac_verify`] when the comparison guards acceptance of attacker input.
#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacTag(#[serde(with = "hex_array")] pub [u8; MAC_LEN]);

impl MacTag {
    pub fn as_bytes(&self) -> &[u8; MAC_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for MacTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MacTag({})", hex::encode(self.0))
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`, without separators. Callers
/// are responsible for unambiguous framing (fixed widths or length
/// prefixes).
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

type HmacSha256 = Hmac<Sha256>;

/// HMAC-SHA-256 of `data` under a 32-byte key.
pub fn mac(key: &[u8; 32], data: &[u8]) -> MacTag {
    let mut m = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(data);
    MacTag(m.finalize().into_bytes().into())
}

/// Constant-time verification: recompute and compare.
pub fn mac_verify(key: &[u8; 32], data: &[u8], tag: &MacTag) -> bool {
    let mut m = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(data);
    m.verify_slice(&tag.0).is_ok()
}

/// Serde adapter rendering fixed-size byte arrays as lowercase hex strings.
pub(crate) mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(
        bytes: &[u8; N],
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        de: D,
    ) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(de)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("wrong byte length"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // SHA-256 published constants.
    #[test]
    fn sha256_empty_string_vector() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn sha256_abc_vector() {
        assert_eq!(
            hash(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hash_parts_equals_hash_of_concatenation() {
        let d1 = hash_parts(&[b"ab", b"c"]);
        let d2 = hash(b"abc");
        assert_eq!(d1, d2);
    }

    // HMAC-SHA-256, RFC 4231 test case 1: key = 0x0b * 20, data = "Hi There".
    #[test]
    fn hmac_rfc4231_case1() {
        let mut key32 = [0u8; 32];
        key32[..20].copy_from_slice(&[0x0b; 20]);
        // RFC 4231 uses a 20-byte key; HMAC pads keys shorter than the block
        // size with zeros, so a zero-extended 32-byte key yields the same tag.
        let tag = mac(&key32, b"Hi There");
        assert_eq!(
            hex::encode(tag.0),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"
        );
    }

    #[test]
    fn mac_is_deterministic_and_key_separated() {
        let k1 = [7u8; 32];
        let mut k2 = k1;
        k2[0] ^= 1;
        assert_eq!(mac(&k1, b"m"), mac(&k1, b"m"));
        assert_ne!(mac(&k1, b"m"), mac(&k2, b"m"));
        assert!(mac_verify(&k1, b"m", &mac(&k1, b"m")));
        assert!(!mac_verify(&k2, b"m", &mac(&k1, b"m")));
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = hash(b"round trip");
        assert_eq!(Digest::from_hex(&d.to_hex()), Some(d));
        assert_eq!(Digest::from_hex("zz"), None);
    }

    #[test]
    fn digest_serde_uses_hex() {
        let d = hash(b"x");
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, format!("\"{}\"", d.to_hex()));
        let back: Digest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
