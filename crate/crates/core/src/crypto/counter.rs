//! Persisted monotonic counter, the desk-scale analog of a hardware
//! anti-rollback counter.
//!
//! File format: 8-byte big-endian value followed by a 32-byte
//! HMAC-SHA-256 over (domain tag ‖ value) under the store's seal key. The
//! file models hardware the adversary cannot regress; the MAC catches
//! accidental corruption and makes tampering in tests fail loudly.
//!
//! Writes go through a temp file plus atomic rename so a crash between the
//! two steps leaves either the old or the new value, never a torn file.

use std::fs;
use std::path::{Path, PathBuf};

use super::seal::SealKey;
use super::{domains, mac, mac_verify, CryptoError, MacTag};

pub const COUNTER_FILE_LEN: usize = 8 + 32;

/// Single-writer persisted counter. Increments are durable before they are
/// observable.
pub struct MonotonicCounter {
    path: PathBuf,
    key: SealKey,
    value: u64,
}

impl MonotonicCounter {
    /// Create a fresh counter at 0. Fails if the file already exists.
    pub fn create(path: &Path, key: SealKey) -> Result<MonotonicCounter, CryptoError> {
        if path.exists() {
            return Err(CryptoError::Persistence(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                "counter file already exists",
            )));
        }
        let c = MonotonicCounter { path: path.to_path_buf(), key, value: 0 };
        c.persist()?;
        Ok(c)
    }

    /// Load an existing counter, verifying its MAC.
    pub fn open(path: &Path, key: SealKey) -> Result<MonotonicCounter, CryptoError> {
        let bytes = fs::read(path)?;
        if bytes.len() != COUNTER_FILE_LEN {
            return Err(CryptoError::AuthenticationFailure);
        }
        let value = u64::from_be_bytes(bytes[..8].try_into().unwrap());
        let tag = MacTag(bytes[8..].try_into().unwrap());
        if !mac_verify(key.as_bytes(), &Self::mac_input(value), &tag) {
            return Err(CryptoError::AuthenticationFailure);
        }
        Ok(MonotonicCounter { path: path.to_path_buf(), key, value })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Increment and persist. The new value is on disk before this returns.
    pub fn increment(&mut self) -> Result<u64, CryptoError> {
        self.value = self
            .value
            .checked_add(1)
            .ok_or(CryptoError::InvalidParams("counter overflow"))?;
        self.persist()?;
        Ok(self.value)
    }

    fn mac_input(value: u64) -> Vec<u8> {
        let mut input = Vec::with_capacity(domains::COUNTER_MAC.len() + 8);
        input.extend_from_slice(domains::COUNTER_MAC);
        input.extend_from_slice(&value.to_be_bytes());
        input
    }

    fn persist(&self) -> Result<(), CryptoError> {
        let mut bytes = Vec::with_capacity(COUNTER_FILE_LEN);
        bytes.extend_from_slice(&self.value.to_be_bytes());
        bytes.extend_from_slice(&mac(self.key.as_bytes(), &Self::mac_input(self.value)).0);

        let tmp = self.path.with_extension("tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, &self.path)?;
        Ok(())
    }
}

impl std::fmt::Debug for MonotonicCounter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MonotonicCounter(value={}, path={})", self.value, self.path.display())
    }
}
