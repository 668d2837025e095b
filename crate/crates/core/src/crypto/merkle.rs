//! Binary Merkle tree with domain-separated hashing.
//!
//! Leaves hash as `sha256(0x00 ‖ leaf)`, interior nodes as
//! `sha256(0x01 ‖ left ‖ right)`. A level with an odd node count pairs its
//! last node with itself.

use thiserror::Error;

use super::digest::{sha256_parts, Digest32};

const LEAF_TAG: [u8; 1] = [0x00];
const NODE_TAG: [u8; 1] = [0x01];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("merkle tree needs at least one leaf")]
    Empty,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

pub fn leaf_hash(leaf: &[u8]) -> Digest32 {
    sha256_parts(&[&LEAF_TAG, leaf])
}

pub fn node_hash(left: &Digest32, right: &Digest32) -> Digest32 {
    sha256_parts(&[&NODE_TAG, &left.0, &right.0])
}

/// Sibling hashes from leaf level up to (not including) the root.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MerkleProof {
    pub siblings: Vec<Digest32>,
}

#[derive(Debug, Clone)]
pub struct MerkleTree {
    /// `levels[0]` holds leaf hashes; the last level holds only the root.
    levels: Vec<Vec<Digest32>>,
}

impl MerkleTree {
    pub fn new<I, T>(leaves: I) -> Result<Self, MerkleError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let hashed: Vec<Digest32> = leaves.into_iter().map(|l| leaf_hash(l.as_ref())).collect();
        Self::from_leaf_hashes(hashed)
    }

    pub fn from_leaf_hashes(hashed: Vec<Digest32>) -> Result<Self, MerkleError> {
        if hashed.is_empty() {
            return Err(MerkleError::Empty);
        }
        let mut levels = vec![hashed];
        while levels.last().map_or(0, Vec::len) > 1 {
            let prev = levels.last().expect("non-empty");
            let next = prev
                .chunks(2)
                .map(|pair| node_hash(&pair[0], pair.get(1).unwrap_or(&pair[0])))
                .collect();
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn root(&self) -> Digest32 {
        self.levels.last().expect("non-empty")[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn proof(&self, index: usize) -> Result<MerkleProof, MerkleError> {
        if index >= self.leaf_count() {
            return Err(MerkleError::IndexOutOfRange {
                index,
                len: self.leaf_count(),
            });
        }
        let mut siblings = Vec::with_capacity(self.levels.len() - 1);
        let mut idx = index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = idx ^ 1;
            siblings.push(*level.get(sib).unwrap_or(&level[idx]));
            idx /= 2;
        }
        Ok(MerkleProof { siblings })
    }
}

pub fn merkle_root<I, T>(leaves: I) -> Result<Digest32, MerkleError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    MerkleTree::new(leaves).map(|t| t.root())
}

pub fn merkle_proof<I, T>(leaves: I, index: usize) -> Result<MerkleProof, MerkleError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    MerkleTree::new(leaves)?.proof(index)
}

/// Recompute the root from `leaf` and its path. An odd index never pairs
/// with itself, so a self-sibling there marks a forged position.
pub fn verify_proof(root: &Digest32, leaf: &[u8], index: usize, proof: &MerkleProof) -> bool {
    let mut h = leaf_hash(leaf);
    let mut idx = index;
    for sib in &proof.siblings {
        h = if idx.is_multiple_of(2) {
            node_hash(&h, sib)
        } else {
            if *sib == h {
                return false;
            }
            node_hash(sib, &h)
        };
        idx /= 2;
    }
    idx == 0 && h == *root
}
