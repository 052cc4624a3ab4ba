//! Evidence chain file: header, checkpoint records, and the leaf archive
//! that lets a verifier re-derive Merkle roots and sample segments without
//! replaying the full hash chains.
//!
//! The genesis hash h_0 commits to the header core (version, session id,
//! public key, verifier nonce, config echo), so header tampering breaks
//! linkage at the first checkpoint. The quote is excluded from h_0; it is
//! authenticated by the platform root signature instead.

use std::fs;
use std::io;
use std::path::Path;

use crate::crypto::{self, domains, AttestationQuote, Digest, PublicKey};
use crate::wire::{self, Reader, WireError};

use super::checkpoint::{Checkpoint, SESSION_ID_LEN};
use super::SessionConfig;

pub const FILE_MAGIC: &[u8; 4] = b"PACF";
pub const FILE_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ChainFileError {
    #[error("chain file i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("chain file is malformed: {0}")]
    Malformed(#[from] WireError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainHeader {
    pub session_id: [u8; SESSION_ID_LEN],
    pub public_key: PublicKey,
    pub verifier_nonce: Vec<u8>,
    pub quote: AttestationQuote,
    pub config: SessionConfig,
}

impl ChainHeader {
    /// Bytes committed by h_0. The quote is excluded: its integrity comes
    /// from the platform root signature, not the chain.
    pub fn core_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(128);
        wire::put_u16(&mut buf, FILE_VERSION);
        buf.extend_from_slice(&self.session_id);
        buf.extend_from_slice(&self.public_key.0);
        wire::put_var_bytes(&mut buf, &self.verifier_nonce);
        self.config.encode_into(&mut buf);
        buf
    }

    /// h_0: genesis anchor for the chain hash sequence.
    pub fn genesis_hash(&self) -> Digest {
        crypto::hash_parts(&[domains::GENESIS, &self.core_bytes()])
    }

    fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&self.session_id);
        buf.extend_from_slice(&self.public_key.0);
        wire::put_var_bytes(buf, &self.verifier_nonce);
        wire::put_var_bytes(buf, &self.quote.encode());
        self.config.encode_into(buf);
    }

    fn decode(r: &mut Reader<'_>) -> Result<ChainHeader, WireError> {
        let session_id: [u8; SESSION_ID_LEN] = r.array()?;
        let public_key = PublicKey(r.array()?);
        let verifier_nonce = r.var_bytes()?.to_vec();
        let quote_bytes = r.var_bytes()?;
        let mut qr = Reader::new(quote_bytes);
        let quote = AttestationQuote::decode(&mut qr)
            .map_err(|_| WireError::InvalidValue { field: "quote", value: 0 })?;
        qr.finish()?;
        let config = SessionConfig::decode(r)?;
        Ok(ChainHeader { session_id, public_key, verifier_nonce, quote, config })
    }
}

/// Committed leaves for one checkpoint's hash chain, archived so sampled
/// verification can rebuild the Merkle tree and open segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafArchiveEntry {
    pub checkpoint_index: u64,
    pub leaves: Vec<[u8; 32]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceChainFile {
    pub header: ChainHeader,
    pub checkpoints: Vec<Checkpoint>,
    pub leaf_archive: Vec<LeafArchiveEntry>,
}

impl EvidenceChainFile {
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(FILE_MAGIC);
        wire::put_u16(&mut buf, FILE_VERSION);
        self.header.encode_into(&mut buf);
        wire::put_u32(&mut buf, self.checkpoints.len() as u32);
        for c in &self.checkpoints {
            buf.extend_from_slice(&c.encode_record());
        }
        wire::put_u32(&mut buf, self.leaf_archive.len() as u32);
        for entry in &self.leaf_archive {
            wire::put_u64(&mut buf, entry.checkpoint_index);
            wire::put_u32(&mut buf, entry.leaves.len() as u32);
            for leaf in &entry.leaves {
                buf.extend_from_slice(leaf);
            }
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<EvidenceChainFile, WireError> {
        let mut r = Reader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if &magic != FILE_MAGIC {
            return Err(WireError::InvalidValue { field: "file_magic", value: magic[0] as u64 });
        }
        let version = r.u16()?;
        if version != FILE_VERSION {
            return Err(WireError::InvalidValue { field: "file_version", value: version as u64 });
        }
        let header = ChainHeader::decode(&mut r)?;
        let n_checkpoints = r.u32()? as usize;
        let mut checkpoints = Vec::with_capacity(n_checkpoints.min(1 << 16));
        for _ in 0..n_checkpoints {
            checkpoints.push(Checkpoint::decode_record(&mut r)?);
        }
        let n_entries = r.u32()? as usize;
        let mut leaf_archive: Vec<LeafArchiveEntry> = Vec::with_capacity(n_entries.min(1 << 16));
        for _ in 0..n_entries {
            let checkpoint_index = r.u64()?;
            if let Some(prev) = leaf_archive.last() {
                if prev.checkpoint_index >= checkpoint_index {
                    return Err(WireError::InvalidValue {
                        field: "leaf_archive_order",
                        value: checkpoint_index,
                    });
                }
            }
            let n_leaves = r.u32()? as usize;
            let mut leaves = Vec::with_capacity(n_leaves.min(1 << 16));
            for _ in 0..n_leaves {
                leaves.push(r.array()?);
            }
            leaf_archive.push(LeafArchiveEntry { checkpoint_index, leaves });
        }
        r.finish()?;
        Ok(EvidenceChainFile { header, checkpoints, leaf_archive })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), ChainFileError> {
        Ok(fs::write(path, self.encode())?)
    }

    pub fn read_from(path: &Path) -> Result<EvidenceChainFile, ChainFileError> {
        Ok(EvidenceChainFile::decode(&fs::read(path)?)?)
    }

    /// Archived leaves for a checkpoint, if present.
    pub fn leaves_for(&self, checkpoint_index: u64) -> Option<&[[u8; 32]]> {
        self.leaf_archive
            .binary_search_by_key(&checkpoint_index, |e| e.checkpoint_index)
            .ok()
            .map(|i| self.leaf_archive[i].leaves.as_slice())
    }
}
