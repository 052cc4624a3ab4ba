//! Software platform trust root.
//!
//! Stands in for the hardware attestation and sealing infrastructure: a
//! root keypair signs quotes binding session public keys to an enclave
//! measurement, and sealing keys are derived from a platform secret plus
//! that measurement, so a different code identity cannot unseal.

use serde::{Deserialize, Serialize};

use super::keys::{KeyPair, PublicKey, SignatureBytes};
use super::seal::SealKey;
use super::{domains, hash_parts, CryptoError, Digest};
use crate::wire::{self, Reader};

/// Platform root: sealing secret plus quote-signing keypair. Loaded from
/// config; defaults derive deterministically from the platform secret so a
/// bare secret is a complete trust root.
#[derive(Clone)]
pub struct PlatformRoot {
    secret: [u8; 32],
    root_key: KeyPair,
}

impl PlatformRoot {
    pub fn new(secret: [u8; 32], root_seed: Option<[u8; 32]>) -> PlatformRoot {
        let seed = root_seed.unwrap_or_else(|| {
            hash_parts(&[domains::QUOTE, b".rootkey", &secret]).0
        });
        PlatformRoot { secret, root_key: KeyPair::from_seed(&seed) }
    }

    pub fn root_public(&self) -> PublicKey {
        self.root_key.public()
    }

    /// Sealing key bound to an enclave measurement.
    pub fn seal_key(&self, measurement: &Digest) -> SealKey {
        SealKey::from_digest(hash_parts(&[domains::SEAL_KEY, &self.secret, &measurement.0]))
    }

    /// Quote binding `bound_public_key` to `measurement`, fresh under
    /// `nonce`.
    pub fn issue_quote(
        &self,
        measurement: Digest,
        bound_public_key: PublicKey,
        nonce: &[u8],
    ) -> AttestationQuote {
        let msg = quote_message(&measurement, &bound_public_key, nonce);
        AttestationQuote {
            enclave_measurement: measurement,
            bound_public_key,
            nonce: nonce.to_vec(),
            root_signature: self.root_key.sign(&msg),
        }
    }
}

impl std::fmt::Debug for PlatformRoot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PlatformRoot(pk={})", hex::encode(self.root_public().0))
    }
}

/// Measurement of the pipeline code/config identity.
pub fn measurement(config_identity: &[u8]) -> Digest {
    hash_parts(&[domains::MEASUREMENT, config_identity])
}

fn quote_message(measurement: &Digest, pk: &PublicKey, nonce: &[u8]) -> Vec<u8> {
    let mut msg = Vec::with_capacity(domains::QUOTE.len() + 32 + 32 + 4 + nonce.len());
    msg.extend_from_slice(domains::QUOTE);
    msg.extend_from_slice(&measurement.0);
    msg.extend_from_slice(&pk.0);
    wire::put_var_bytes(&mut msg, nonce);
    msg
}

/// Signed binding (measurement, session public key, nonce) under the
/// platform root.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AttestationQuote {
    pub enclave_measurement: Digest,
    pub bound_public_key: PublicKey,
    #[serde(with = "super::seal::hex_vec")]
    pub nonce: Vec<u8>,
    pub root_signature: SignatureBytes,
}

impl AttestationQuote {
    pub fn verify(&self, root: &PublicKey) -> bool {
        let msg = quote_message(&self.enclave_measurement, &self.bound_public_key, &self.nonce);
        root.verify(&msg, &self.root_signature)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&self.enclave_measurement.0);
        buf.extend_from_slice(&self.bound_public_key.0);
        wire::put_var_bytes(&mut buf, &self.nonce);
        buf.extend_from_slice(&self.root_signature.0);
        buf
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<AttestationQuote, CryptoError> {
        let enclave_measurement = Digest(r.array()?);
        let bound_public_key = PublicKey(r.array()?);
        let nonce = r.var_bytes()?.to_vec();
        let root_signature = SignatureBytes(r.array()?);
        Ok(AttestationQuote { enclave_measurement, bound_public_key, nonce, root_signature })
    }
}
