//! Ed25519 session and platform signing keys.
//!
//! Ed25519 gives 32-byte public keys and deterministic signatures (RFC
//! 8032), so golden-file tests stay byte-stable across runs.

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};

use super::hex_array;

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const SECRET_SEED_LEN: usize = 32;

/// Signing keypair. The secret seed is exposed only through
/// [`KeyPair::secret_seed`], used when sealing session state.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey(#[serde(with = "hex_array")] pub [u8; PUBLIC_KEY_LEN]);

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureBytes(#[serde(with = "hex_array")] pub [u8; SIGNATURE_LEN]);

impl KeyPair {
    /// Deterministic construction from a 32-byte seed. Callers draw the seed
    /// from their RNG, keeping key generation reproducible under fixed
    /// simulation seeds.
    pub fn from_seed(seed: &[u8; SECRET_SEED_LEN]) -> KeyPair {
        KeyPair { signing: SigningKey::from_bytes(seed) }
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn secret_seed(&self) -> [u8; SECRET_SEED_LEN] {
        self.signing.to_bytes()
    }

    pub fn sign(&self, msg: &[u8]) -> SignatureBytes {
        SignatureBytes(self.signing.sign(msg).to_bytes())
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyPair(pk={})", hex::encode(self.public().0))
    }
}

impl PublicKey {
    pub fn verify(&self, msg: &[u8], sig: &SignatureBytes) -> bool {
        let Ok(vk) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        vk.verify_strict(msg, &sig).is_ok()
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.0))
    }
}

impl SignatureBytes {
    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SignatureBytes({})", hex::encode(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_verify_round_trip() {
        let kp = KeyPair::from_seed(&[42u8; 32]);
        let sig = kp.sign(b"message");
        assert!(kp.public().verify(b"message", &sig));
        assert!(!kp.public().verify(b"messag3", &sig));
    }

    #[test]
    fn signing_is_deterministic() {
        let kp = KeyPair::from_seed(&[1u8; 32]);
        assert_eq!(kp.sign(b"m").0, kp.sign(b"m").0);
    }

    #[test]
    fn different_seeds_give_different_keys() {
        let a = KeyPair::from_seed(&[1u8; 32]);
        let b = KeyPair::from_seed(&[2u8; 32]);
        assert_ne!(a.public().0, b.public().0);
        // Cross-key verification must fail.
        assert!(!b.public().verify(b"m", &a.sign(b"m")));
    }

    #[test]
    fn single_bit_message_mutations_fail_verification() {
        let kp = KeyPair::from_seed(&[9u8; 32]);
        let msg = b"attested content".to_vec();
        let sig = kp.sign(&msg);
        for byte in 0..msg.len() {
            for bit in 0..8 {
                let mut m = msg.clone();
                m[byte] ^= 1 << bit;
                assert!(!kp.public().verify(&m, &sig));
            }
        }
    }
}
