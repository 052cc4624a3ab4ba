//! Binary Merkle tree over 32-byte chain states.
//!
//! Leaf and interior hashes are domain-separated (0x00 / 0x01 prefixes) so
//! a leaf can never be confused with a node. Leaf count is padded to the
//! next power of two by repeating the last leaf.

use serde::{Deserialize, Serialize};

use crate::crypto::{domains, hash_parts, Digest};
use crate::wire::{self, Reader, WireError};

/// Authentication path from one leaf to the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerklePath {
    pub leaf_index: u64,
    pub siblings: Vec<Digest>,
}

/// Fully materialized tree; level 0 holds the (padded) leaf hashes.
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
    leaf_count: usize,
}

pub fn leaf_hash(leaf: &[u8; 32]) -> Digest {
    hash_parts(&[domains::MERKLE_LEAF, leaf])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    hash_parts(&[domains::MERKLE_NODE, &left.0, &right.0])
}

impl MerkleTree {
    /// Build over `leaves`, which must be nonempty.
    pub fn build(leaves: &[[u8; 32]]) -> MerkleTree {
        assert!(!leaves.is_empty(), "merkle tree needs at least one leaf");
        let padded = leaves.len().next_power_of_two();
        let mut level: Vec<Digest> = Vec::with_capacity(padded);
        level.extend(leaves.iter().map(leaf_hash));
        let last = *level.last().unwrap();
        level.resize(padded, last);

        let mut levels = vec![level];
        while levels.last().unwrap().len() > 1 {
            let below = levels.last().unwrap();
            let mut above = Vec::with_capacity(below.len() / 2);
            for pair in below.chunks_exact(2) {
                above.push(node_hash(&pair[0], &pair[1]));
            }
            levels.push(above);
        }
        MerkleTree { levels, leaf_count: leaves.len() }
    }

    pub fn root(&self) -> Digest {
        self.levels.last().unwrap()[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Authentication path for an original (unpadded) leaf index.
    pub fn path(&self, leaf_index: usize) -> MerklePath {
        assert!(leaf_index < self.leaf_count, "leaf index out of range");
        let mut siblings = Vec::with_capacity(self.levels.len() - 1);
        let mut idx = leaf_index;
        for level in &self.levels[..self.levels.len() - 1] {
            siblings.push(level[idx ^ 1]);
            idx >>= 1;
        }
        MerklePath { leaf_index: leaf_index as u64, siblings }
    }
}

/// Check that `leaf` sits at `path.leaf_index` under `root`.
pub fn verify_path(root: &Digest, leaf: &[u8; 32], path: &MerklePath) -> bool {
    // The index must fit inside the tree the path describes.
    if path.siblings.len() >= 64 || path.leaf_index >> path.siblings.len() != 0 {
        return false;
    }
    let mut acc = leaf_hash(leaf);
    let mut idx = path.leaf_index;
    for sib in &path.siblings {
        acc = if idx & 1 == 0 { node_hash(&acc, sib) } else { node_hash(sib, &acc) };
        idx >>= 1;
    }
    acc == *root
}

impl MerklePath {
    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        wire::put_u64(buf, self.leaf_index);
        wire::put_u16(buf, self.siblings.len() as u16);
        for s in &self.siblings {
            buf.extend_from_slice(&s.0);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<MerklePath, WireError> {
        let leaf_index = r.u64()?;
        let n = r.u16()? as usize;
        if n >= 64 {
            return Err(WireError::InvalidValue { field: "path_len", value: n as u64 });
        }
        let mut siblings = Vec::with_capacity(n);
        for _ in 0..n {
            siblings.push(Digest(r.array()?));
        }
        Ok(MerklePath { leaf_index, siblings })
    }
}
