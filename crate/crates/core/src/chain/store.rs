//! On-disk sealed state: one live state file paired with a MAC-protected
//! monotonic counter, plus an archive of superseded seals.
//!
//! The state file is plaintext framing around an authenticated blob: the
//! counter value it was sealed against rides alongside so recovery can
//! compare it to the live counter before unsealing. The archive directory
//! retains recent superseded seals; tests use it to stage rollback attacks.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::crypto::seal::SealedBlob;
use crate::crypto::{CryptoError, MonotonicCounter, SealKey};
use crate::wire::{self, Reader, WireError};

const STATE_MAGIC: &[u8; 4] = b"PSST";
const STATE_VERSION: u16 = 1;
const STATE_FILE: &str = "state.bin";
const COUNTER_FILE: &str = "counter.bin";
const ARCHIVE_DIR: &str = "archive";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("sealed state file is missing")]
    StateMissing,
    #[error("sealed state file is malformed: {0}")]
    Malformed(#[from] WireError),
    #[error("store i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("counter failure: {0}")]
    Counter(CryptoError),
}

/// Plaintext framing read back before unsealing.
#[derive(Clone, Debug)]
pub struct StoredState {
    pub session_id: [u8; 16],
    /// Nonce prefix fixed at store creation; combined with the counter it
    /// yields a unique AEAD nonce per seal.
    pub nonce_prefix: [u8; 4],
    /// Counter value the blob was sealed against (also its AEAD
    /// associated data).
    pub counter_value: u64,
    pub blob: SealedBlob,
}

impl StoredState {
    fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(64 + self.blob.ciphertext.len());
        buf.extend_from_slice(STATE_MAGIC);
        wire::put_u16(&mut buf, STATE_VERSION);
        buf.extend_from_slice(&self.session_id);
        buf.extend_from_slice(&self.nonce_prefix);
        wire::put_u64(&mut buf, self.counter_value);
        buf.extend_from_slice(&self.blob.encode());
        buf
    }

    fn decode(bytes: &[u8]) -> Result<StoredState, WireError> {
        let mut r = Reader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if &magic != STATE_MAGIC {
            return Err(WireError::InvalidValue { field: "state_magic", value: magic[0] as u64 });
        }
        let version = r.u16()?;
        if version != STATE_VERSION {
            return Err(WireError::InvalidValue { field: "state_version", value: version as u64 });
        }
        let session_id: [u8; 16] = r.array()?;
        let nonce_prefix: [u8; 4] = r.array()?;
        let counter_value = r.u64()?;
        let blob = SealedBlob::decode(r.rest())
            .map_err(|_| WireError::InvalidValue { field: "sealed_blob", value: 0 })?;
        Ok(StoredState { session_id, nonce_prefix, counter_value, blob })
    }
}

/// Directory holding the live seal, its counter, and archived seals.
pub struct SealedStore {
    dir: PathBuf,
    retained_seals: usize,
}

impl SealedStore {
    /// Create a fresh store directory; fails if a state file already
    /// exists there.
    pub fn create(dir: &Path, retained_seals: usize) -> Result<SealedStore, StoreError> {
        fs::create_dir_all(dir)?;
        fs::create_dir_all(dir.join(ARCHIVE_DIR))?;
        if dir.join(STATE_FILE).exists() {
            return Err(StoreError::Io(io::Error::new(
                io::ErrorKind::AlreadyExists,
                "store directory already holds sealed state",
            )));
        }
        Ok(SealedStore { dir: dir.to_path_buf(), retained_seals })
    }

    /// Open an existing store for recovery.
    pub fn open(dir: &Path, retained_seals: usize) -> Result<SealedStore, StoreError> {
        if !dir.join(STATE_FILE).exists() {
            return Err(StoreError::StateMissing);
        }
        Ok(SealedStore { dir: dir.to_path_buf(), retained_seals })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn create_counter(&self, key: &SealKey) -> Result<MonotonicCounter, StoreError> {
        MonotonicCounter::create(&self.dir.join(COUNTER_FILE), *key).map_err(StoreError::Counter)
    }

    pub fn open_counter(&self, key: &SealKey) -> Result<MonotonicCounter, StoreError> {
        MonotonicCounter::open(&self.dir.join(COUNTER_FILE), *key).map_err(StoreError::Counter)
    }

    /// Persist a new live seal, archiving the one it replaces.
    pub fn write_state(&self, state: &StoredState) -> Result<(), StoreError> {
        let live = self.dir.join(STATE_FILE);
        if live.exists() {
            let old = StoredState::decode(&fs::read(&live)?)?;
            let name = format!("state-{:016x}.bin", old.counter_value);
            fs::rename(&live, self.dir.join(ARCHIVE_DIR).join(name))?;
            self.prune_archive()?;
        }
        let tmp = self.dir.join("state.tmp");
        fs::write(&tmp, state.encode())?;
        fs::rename(&tmp, &live)?;
        Ok(())
    }

    pub fn read_state(&self) -> Result<StoredState, StoreError> {
        let live = self.dir.join(STATE_FILE);
        if !live.exists() {
            return Err(StoreError::StateMissing);
        }
        Ok(StoredState::decode(&fs::read(&live)?)?)
    }

    /// Counter values of archived seals, oldest first.
    pub fn archived_counters(&self) -> Result<Vec<u64>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.dir.join(ARCHIVE_DIR))? {
            let name = entry?.file_name();
            let name = name.to_string_lossy().into_owned();
            if let Some(hex) = name.strip_prefix("state-").and_then(|s| s.strip_suffix(".bin")) {
                if let Ok(v) = u64::from_str_radix(hex, 16) {
                    out.push(v);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Replace the live seal with an archived one. This models the
    /// rollback attack the counter protocol exists to detect; production
    /// code never calls it.
    pub fn rollback_to_archived(&self, counter_value: u64) -> Result<(), StoreError> {
        let name = format!("state-{counter_value:016x}.bin");
        let src = self.dir.join(ARCHIVE_DIR).join(name);
        if !src.exists() {
            return Err(StoreError::StateMissing);
        }
        fs::copy(&src, self.dir.join(STATE_FILE))?;
        Ok(())
    }

    fn prune_archive(&self) -> Result<(), StoreError> {
        let mut counters = self.archived_counters()?;
        while counters.len() > self.retained_seals {
            let v = counters.remove(0);
            let name = format!("state-{v:016x}.bin");
            fs::remove_file(self.dir.join(ARCHIVE_DIR).join(name))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::seal::{counter_nonce, seal};

    fn key() -> SealKey {
        SealKey::from_bytes([7u8; 32])
    }

    fn stored(counter_value: u64) -> StoredState {
        let nonce = counter_nonce([9, 9, 9, 9], counter_value);
        let blob = seal(&key(), nonce, b"state bytes", &counter_value.to_be_bytes());
        StoredState {
            session_id: [3u8; 16],
            nonce_prefix: [9, 9, 9, 9],
            counter_value,
            blob,
        }
    }

    #[test]
    fn write_read_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let store = SealedStore::create(tmp.path(), 4).unwrap();
        store.write_state(&stored(1)).unwrap();
        let back = store.read_state().unwrap();
        assert_eq!(back.counter_value, 1);
        assert_eq!(back.session_id, [3u8; 16]);
        assert_eq!(back.nonce_prefix, [9, 9, 9, 9]);
    }

    #[test]
    fn superseded_seals_are_archived_and_pruned() {
        let tmp = tempfile::tempdir().unwrap();
        let store = SealedStore::create(tmp.path(), 3).unwrap();
        for v in 1..=6 {
            store.write_state(&stored(v)).unwrap();
        }
        // Live seal is 6; archive keeps the 3 newest superseded seals.
        assert_eq!(store.read_state().unwrap().counter_value, 6);
        assert_eq!(store.archived_counters().unwrap(), vec![3, 4, 5]);
    }

    #[test]
    fn rollback_helper_restores_old_seal() {
        let tmp = tempfile::tempdir().unwrap();
        let store = SealedStore::create(tmp.path(), 4).unwrap();
        for v in 1..=3 {
            store.write_state(&stored(v)).unwrap();
        }
        store.rollback_to_archived(1).unwrap();
        assert_eq!(store.read_state().unwrap().counter_value, 1);
    }

    #[test]
    fn open_requires_existing_state() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(SealedStore::open(tmp.path(), 4), Err(StoreError::StateMissing)));
        let store = SealedStore::create(tmp.path(), 4).unwrap();
        store.write_state(&stored(1)).unwrap();
        assert!(SealedStore::open(tmp.path(), 4).is_ok());
    }

    #[test]
    fn create_refuses_existing_state() {
        let tmp = tempfile::tempdir().unwrap();
        let store = SealedStore::create(tmp.path(), 4).unwrap();
        store.write_state(&stored(1)).unwrap();
        assert!(SealedStore::create(tmp.path(), 4).is_err());
    }

    #[test]
    fn malformed_state_file_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let store = SealedStore::create(tmp.path(), 4).unwrap();
        store.write_state(&stored(1)).unwrap();
        let path = tmp.path().join("state.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(store.read_state(), Err(StoreError::Malformed(_))));
    }
}
