//! Authenticated sealing of enclave state (AES-256-GCM).
//!
//! The 96-bit nonce is supplied by the caller and must never repeat under
//! one key. The sealed store builds it from a per-store random prefix plus
//! the monotonic counter value, so uniqueness follows from the counter
//! invariant.

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, KeyInit};
use serde::{Deserialize, Serialize};

use super::{hex_array, CryptoError, Digest};
use crate::wire::{self, Reader};

pub const SEAL_KEY_LEN: usize = 32;
pub const SEAL_NONCE_LEN: usize = 12;

/// Symmetric sealing key derived from the platform secret and enclave
/// measurement. Debug output is redacted.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SealKey(pub(crate) [u8; SEAL_KEY_LEN]);

impl SealKey {
    pub fn from_bytes(bytes: [u8; SEAL_KEY_LEN]) -> SealKey {
        SealKey(bytes)
    }

    pub fn from_digest(d: Digest) -> SealKey {
        SealKey(d.0)
    }

    pub(crate) fn as_bytes(&self) -> &[u8; SEAL_KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for SealKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SealKey(..)")
    }
}

/// Nonce plus ciphertext (GCM tag appended to the ciphertext).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SealedBlob {
    #[serde(with = "hex_array")]
    pub nonce: [u8; SEAL_NONCE_LEN],
    #[serde(with = "hex_vec")]
    pub ciphertext: Vec<u8>,
}

impl SealedBlob {
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(SEAL_NONCE_LEN + 4 + self.ciphertext.len());
        buf.extend_from_slice(&self.nonce);
        wire::put_var_bytes(&mut buf, &self.ciphertext);
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<SealedBlob, CryptoError> {
        let mut r = Reader::new(bytes);
        let nonce: [u8; SEAL_NONCE_LEN] = r.array()?;
        let ciphertext = r.var_bytes()?.to_vec();
        r.finish()?;
        Ok(SealedBlob { nonce, ciphertext })
    }
}

/// Build the 96-bit nonce from a 4-byte store prefix and a counter value.
pub fn counter_nonce(prefix: [u8; 4], counter_value: u64) -> [u8; SEAL_NONCE_LEN] {
    let mut nonce = [0u8; SEAL_NONCE_LEN];
    nonce[..4].copy_from_slice(&prefix);
    nonce[4..].copy_from_slice(&counter_value.to_be_bytes());
    nonce
}

pub fn seal(
    key: &SealKey,
    nonce: [u8; SEAL_NONCE_LEN],
    plaintext: &[u8],
    associated_data: &[u8],
) -> SealedBlob {
    let cipher = Aes256Gcm::new(&key.0.into());
    let ciphertext = cipher
        .encrypt(&nonce.into(), Payload { msg: plaintext, aad: associated_data })
        .expect("AES-GCM encryption is infallible for in-memory buffers");
    SealedBlob { nonce, ciphertext }
}

pub fn unseal(
    key: &SealKey,
    blob: &SealedBlob,
    associated_data: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes256Gcm::new(&key.0.into());
    cipher
        .decrypt(
            &blob.nonce.into(),
            Payload { msg: &blob.ciphertext, aad: associated_data },
        )
        .map_err(|_| CryptoError::AuthenticationFailure)
}

/// Serde adapter rendering variable-length byte vectors as hex strings.
pub(crate) mod hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> SealKey {
        SealKey([0xA5; 32])
    }

    #[test]
    fn seal_unseal_round_trip() {
        let nonce = counter_nonce([1, 2, 3, 4], 7);
        let blob = seal(&key(), nonce, b"session state", &7u64.to_be_bytes());
        let back = unseal(&key(), &blob, &7u64.to_be_bytes()).unwrap();
        assert_eq!(back, b"session state");
    }

    #[test]
    fn wrong_associated_counter_fails() {
        // Sealed under counter 6, opened claiming counter 5.
        let blob = seal(&key(), counter_nonce([0; 4], 6), b"p", &6u64.to_be_bytes());
        let err = unseal(&key(), &blob, &5u64.to_be_bytes());
        assert!(matches!(err, Err(CryptoError::AuthenticationFailure)));
    }

    #[test]
    fn wrong_key_fails() {
        let blob = seal(&key(), counter_nonce([0; 4], 1), b"p", b"");
        let other = SealKey([0x5A; 32]);
        assert!(unseal(&other, &blob, b"").is_err());
    }

    #[test]
    fn every_single_bit_corruption_is_detected() {
        let blob = seal(&key(), counter_nonce([9; 4], 3), b"some sealed payload", b"ad");
        for byte in 0..blob.ciphertext.len() {
            for bit in 0..8 {
                let mut tampered = blob.clone();
                tampered.ciphertext[byte] ^= 1 << bit;
                assert!(unseal(&key(), &tampered, b"ad").is_err());
            }
        }
        for byte in 0..SEAL_NONCE_LEN {
            let mut tampered = blob.clone();
            tampered.nonce[byte] ^= 1;
            assert!(unseal(&key(), &tampered, b"ad").is_err());
        }
    }

    #[test]
    fn blob_encoding_round_trips() {
        let blob = seal(&key(), counter_nonce([1; 4], 42), b"x", b"");
        let decoded = SealedBlob::decode(&blob.encode()).unwrap();
        assert_eq!(decoded, blob);
    }
}
