//! Sequential work function (SWF).
//!
//! Each checkpoint proves elapsed sequential computation: an Argon2id
//! derivation seeded by the previous checkpoint's output starts an
//! L-iteration SHA-256 chain, with every g-th state committed as a Merkle
//! leaf. Verifiers either recompute the whole step or sample k of the L/g
//! segments non-interactively, with challenge indices derived Fiat-Shamir
//! style from the Merkle root and chain context.
//!
//! An adversary who skipped the work in one of S segments survives sampled
//! verification with probability (1 - 1/S)^k, so detection per checkpoint
//! is 1 - (1 - 1/S)^k and compounds across checkpoints and audits.

pub mod merkle;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::crypto::{domains, hash_parts, memory_hard_derive, CryptoError, Digest, MemoryHardParams};
use crate::wire::{self, Reader, WireError};
use merkle::{verify_path, MerklePath, MerkleTree};

#[derive(Debug, Error)]
pub enum SwfError {
    #[error("verifier nonce must be at least {MIN_NONCE_LEN} bytes")]
    NonceTooShort,
    #[error("invalid SWF parameters: {0}")]
    InvalidParams(&'static str),
    #[error("openings do not answer the derived challenge")]
    ChallengeMismatch,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

pub const MIN_NONCE_LEN: usize = 16;

/// Work-function shape: memory-hard seed parameters, chain length L,
/// Merkle stride g, and sampling width k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwfParams {
    pub mh: MemoryHardParams,
    pub chain_length: u64,
    pub merkle_stride: u64,
    pub sample_count: u32,
}

impl Default for SwfParams {
    fn default() -> Self {
        SwfParams {
            mh: MemoryHardParams::default(),
            chain_length: 1 << 20,
            merkle_stride: 1 << 12,
            sample_count: 8,
        }
    }
}

impl SwfParams {
    /// Desk-scale parameters: fast enough for simulated multi-hour sessions
    /// while keeping hundreds of segments to sample from.
    pub fn desk_scale() -> Self {
        SwfParams {
            mh: MemoryHardParams::with_memory_cost_bytes(1024 * 1024),
            chain_length: 1 << 16,
            merkle_stride: 1 << 8,
            sample_count: 8,
        }
    }

    /// Tiny parameters for unit tests and high-volume fault harnesses.
    pub fn test_scale() -> Self {
        SwfParams {
            mh: MemoryHardParams::test_scale(),
            chain_length: 1 << 10,
            merkle_stride: 1 << 4,
            sample_count: 8,
        }
    }

    pub fn segments(&self) -> u64 {
        self.chain_length / self.merkle_stride
    }

    pub fn validate(&self) -> Result<(), SwfError> {
        self.mh.validate()?;
        if self.chain_length == 0 {
            return Err(SwfError::InvalidParams("chain_length must be >= 1"));
        }
        if self.merkle_stride == 0 || self.chain_length % self.merkle_stride != 0 {
            return Err(SwfError::InvalidParams("chain_length must be divisible by stride"));
        }
        if self.sample_count as u64 > self.segments() {
            return Err(SwfError::InvalidParams("sample_count exceeds segment count"));
        }
        Ok(())
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        wire::put_u64(buf, self.mh.memory_cost_bytes);
        wire::put_u32(buf, self.mh.time_cost);
        wire::put_u32(buf, self.mh.parallelism);
        wire::put_u32(buf, self.mh.output_len);
        wire::put_u64(buf, self.chain_length);
        wire::put_u64(buf, self.merkle_stride);
        wire::put_u32(buf, self.sample_count);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<SwfParams, WireError> {
        let mh = MemoryHardParams {
            memory_cost_bytes: r.u64()?,
            time_cost: r.u32()?,
            parallelism: r.u32()?,
            output_len: r.u32()?,
        };
        Ok(SwfParams {
            mh,
            chain_length: r.u64()?,
            merkle_stride: r.u64()?,
            sample_count: r.u32()?,
        })
    }
}

/// Temporal proof for one checkpoint. The full leaf array travels in the
/// chain file's auxiliary archive, not here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwfProof {
    pub checkpoint_index: u64,
    /// hash(prev_output ‖ salt): cheap predecessor binding check.
    pub seed_input_digest: Digest,
    #[serde(with = "crate::crypto::hex_array")]
    pub output: [u8; 32],
    pub merkle_root: Digest,
    pub chain_length: u64,
    pub mh_params_echo: MemoryHardParams,
}

impl SwfProof {
    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        wire::put_u64(buf, self.checkpoint_index);
        buf.extend_from_slice(&self.seed_input_digest.0);
        buf.extend_from_slice(&self.output);
        buf.extend_from_slice(&self.merkle_root.0);
        wire::put_u64(buf, self.chain_length);
        wire::put_u64(buf, self.mh_params_echo.memory_cost_bytes);
        wire::put_u32(buf, self.mh_params_echo.time_cost);
        wire::put_u32(buf, self.mh_params_echo.parallelism);
        wire::put_u32(buf, self.mh_params_echo.output_len);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<SwfProof, WireError> {
        Ok(SwfProof {
            checkpoint_index: r.u64()?,
            seed_input_digest: Digest(r.array()?),
            output: r.array()?,
            merkle_root: Digest(r.array()?),
            chain_length: r.u64()?,
            mh_params_echo: MemoryHardParams {
                memory_cost_bytes: r.u64()?,
                time_cost: r.u32()?,
                parallelism: r.u32()?,
                output_len: r.u32()?,
            },
        })
    }
}

/// One sampled segment: both endpoint leaves with their authentication
/// paths. `end_state` must equal the g-fold hash of `start_state`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwfOpening {
    pub segment_start_index: u64,
    pub start_state: [u8; 32],
    pub end_state: [u8; 32],
    pub start_path: MerklePath,
    pub end_path: MerklePath,
}

/// Initial chain value out_0, bound to the verifier's nonce and session.
pub fn swf_init(verifier_nonce: &[u8], session_id: &[u8]) -> Result<[u8; 32], SwfError> {
    if verifier_nonce.len() < MIN_NONCE_LEN {
        return Err(SwfError::NonceTooShort);
    }
    let mut buf = Vec::with_capacity(domains::SWF_INIT.len() + 8 + verifier_nonce.len() + session_id.len());
    buf.extend_from_slice(domains::SWF_INIT);
    wire::put_var_bytes(&mut buf, verifier_nonce);
    wire::put_var_bytes(&mut buf, session_id);
    Ok(crate::crypto::hash(&buf).0)
}

/// Per-checkpoint salt for the memory-hard seed derivation.
pub fn step_salt(session_id: &[u8], checkpoint_index: u64) -> Digest {
    let mut buf = Vec::with_capacity(domains::SWF_SALT.len() + session_id.len() + 8);
    buf.extend_from_slice(domains::SWF_SALT);
    buf.extend_from_slice(session_id);
    wire::put_u64(&mut buf, checkpoint_index);
    crate::crypto::hash(&buf)
}

/// The memory-hard seed for checkpoint `checkpoint_index`.
pub fn derive_seed(
    params: &SwfParams,
    prev_output: &[u8; 32],
    checkpoint_index: u64,
    session_id: &[u8],
) -> Result<[u8; 32], SwfError> {
    let salt = step_salt(session_id, checkpoint_index);
    Ok(memory_hard_derive(&params.mh, prev_output, &salt.0)?)
}

/// Commitment to the seed inputs, carried in the proof so verifiers can
/// check predecessor binding without the memory-hard derivation.
pub fn seed_input_digest(prev_output: &[u8; 32], salt: &Digest) -> Digest {
    hash_parts(&[prev_output, &salt.0])
}

fn sha256_chain(start: &[u8; 32], iterations: u64) -> [u8; 32] {
    let mut state = *start;
    for _ in 0..iterations {
        state = Sha256::digest(state).into();
    }
    state
}

/// Run one full SWF step. Returns the proof and the committed leaves
/// (states s_0, s_g, ..., s_L).
pub fn swf_step(
    params: &SwfParams,
    prev_output: &[u8; 32],
    checkpoint_index: u64,
    session_id: &[u8],
) -> Result<(SwfProof, Vec<[u8; 32]>), SwfError> {
    let seed = derive_seed(params, prev_output, checkpoint_index, session_id)?;
    swf_step_from_seed(params, &seed, prev_output, checkpoint_index, session_id)
}

/// As [`swf_step`], with the memory-hard seed already derived (recovery
/// precomputes it so resumed sessions pay the cost once).
pub fn swf_step_from_seed(
    params: &SwfParams,
    seed: &[u8; 32],
    prev_output: &[u8; 32],
    checkpoint_index: u64,
    session_id: &[u8],
) -> Result<(SwfProof, Vec<[u8; 32]>), SwfError> {
    params.validate()?;
    let salt = step_salt(session_id, checkpoint_index);
    let segments = params.segments() as usize;
    let mut leaves = Vec::with_capacity(segments + 1);
    let mut state = *seed;
    leaves.push(state);
    for _ in 0..segments {
        state = sha256_chain(&state, params.merkle_stride);
        leaves.push(state);
    }
    let tree = MerkleTree::build(&leaves);
    let proof = SwfProof {
        checkpoint_index,
        seed_input_digest: seed_input_digest(prev_output, &salt),
        output: state,
        merkle_root: tree.root(),
        chain_length: params.chain_length,
        mh_params_echo: params.mh,
    };
    Ok((proof, leaves))
}

/// Recompute the entire step and compare. True iff seed binding, output,
/// and Merkle root all match.
pub fn swf_verify_full(
    params: &SwfParams,
    proof: &SwfProof,
    prev_output: &[u8; 32],
    checkpoint_index: u64,
    session_id: &[u8],
) -> Result<bool, SwfError> {
    if proof.checkpoint_index != checkpoint_index
        || proof.chain_length != params.chain_length
        || proof.mh_params_echo != params.mh
    {
        return Ok(false);
    }
    let (expected, _) = swf_step(params, prev_output, checkpoint_index, session_id)?;
    Ok(expected == *proof)
}

/// Non-interactive challenge: hash(merkle_root ‖ predecessor chain hash ‖
/// session nonce).
pub fn challenge_seed(merkle_root: &Digest, prev_chain_hash: &Digest, nonce: &[u8]) -> [u8; 32] {
    hash_parts(&[&merkle_root.0, &prev_chain_hash.0, nonce]).0
}

/// The k sampled segment indices for a challenge, drawn with replacement.
pub fn derive_challenge_indices(challenge: &[u8; 32], k: u32, segments: u64) -> Vec<u64> {
    assert!(segments > 0);
    (0..k)
        .map(|j| {
            let mut buf = Vec::with_capacity(36);
            buf.extend_from_slice(challenge);
            wire::put_u32(&mut buf, j);
            let d = crate::crypto::hash(&buf);
            u64::from_be_bytes(d.0[..8].try_into().unwrap()) % segments
        })
        .collect()
}

/// Open the k challenged segments plus the final segment (which
/// authenticates the output leaf). Opening order: challenge order, then the
/// final segment.
pub fn swf_open(
    leaves: &[[u8; 32]],
    params: &SwfParams,
    challenge: &[u8; 32],
) -> Result<Vec<SwfOpening>, SwfError> {
    params.validate()?;
    let segments = params.segments();
    if leaves.len() as u64 != segments + 1 {
        return Err(SwfError::InvalidParams("leaf count does not match segment count"));
    }
    let tree = MerkleTree::build(leaves);
    let mut indices = derive_challenge_indices(challenge, params.sample_count, segments);
    indices.push(segments - 1);
    Ok(indices
        .into_iter()
        .map(|i| {
            let i_us = i as usize;
            SwfOpening {
                segment_start_index: i,
                start_state: leaves[i_us],
                end_state: leaves[i_us + 1],
                start_path: tree.path(i_us),
                end_path: tree.path(i_us + 1),
            }
        })
        .collect())
}

/// Verify sampled openings against a proof. True iff every opening
/// authenticates under the committed root, spans g recomputed hash
/// iterations, and the final opening lands on the proof output.
pub fn swf_verify_sampled(
    params: &SwfParams,
    proof: &SwfProof,
    openings: &[SwfOpening],
    challenge: &[u8; 32],
) -> Result<bool, SwfError> {
    params.validate()?;
    if proof.chain_length != params.chain_length || proof.mh_params_echo != params.mh {
        return Ok(false);
    }
    let segments = params.segments();
    let mut expected = derive_challenge_indices(challenge, params.sample_count, segments);
    expected.push(segments - 1);
    if openings.len() != expected.len() {
        return Err(SwfError::ChallengeMismatch);
    }
    for (opening, want) in openings.iter().zip(&expected) {
        if opening.segment_start_index != *want {
            return Err(SwfError::ChallengeMismatch);
        }
    }
    for opening in openings {
        let i = opening.segment_start_index;
        if opening.start_path.leaf_index != i || opening.end_path.leaf_index != i + 1 {
            return Ok(false);
        }
        if !verify_path(&proof.merkle_root, &opening.start_state, &opening.start_path)
            || !verify_path(&proof.merkle_root, &opening.end_state, &opening.end_path)
        {
            return Ok(false);
        }
        if sha256_chain(&opening.start_state, params.merkle_stride) != opening.end_state {
            return Ok(false);
        }
    }
    // Final opening's end leaf is s_L; it must equal the claimed output.
    let last = openings.last().expect("k+1 openings checked above");
    Ok(last.end_state == proof.output)
}
