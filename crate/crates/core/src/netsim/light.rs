//! Header-only view kept by lightweight nodes.

use std::collections::HashMap;

use thiserror::Error;

use crate::chain::{BlockHeader, ChainStore, HEADER_FIXED_LEN};
use crate::consensus::{verify_header_signature, ConsensusTag};
use crate::crypto::{verify_proof, Digest32, MerkleProof};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LightError {
    #[error("parent header unknown")]
    UnknownParent,
    #[error("header already known")]
    Duplicate,
    #[error("header fails link, height or timestamp rules")]
    BadLink,
    #[error("header fails its consensus proof")]
    BadProof,
    #[error("block {0} is not on the tracked header chain")]
    NotOnChain(Digest32),
    #[error("merkle proof does not match the header")]
    BadMerkleProof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightOutcome {
    Extended,
    Side,
    Reorganized { depth: u64 },
}

/// What a full node hands a lightweight node to prove inclusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionProof {
    pub block_hash: Digest32,
    pub index: usize,
    pub proof: MerkleProof,
}

impl InclusionProof {
    /// Look up `tx_id` on `store`'s adopted chain.
    pub fn from_store(store: &ChainStore, tx_id: &Digest32) -> Option<Self> {
        let height = store.state().tx_height(tx_id)?;
        let block = store.block_at(height)?;
        let index = block.transactions.iter().position(|t| t.tx_id() == *tx_id)?;
        Some(Self {
            block_hash: block.hash(),
            index,
            proof: block.tx_proof(index)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LightChain {
    headers: HashMap<Digest32, BlockHeader>,
    main: Vec<Digest32>,
}

impl LightChain {
    pub fn new(genesis: BlockHeader) -> Self {
        let h = genesis.hash();
        let mut headers = HashMap::new();
        headers.insert(h, genesis);
        Self {
            headers,
            main: vec![h],
        }
    }

    pub fn height(&self) -> u64 {
        (self.main.len() - 1) as u64
    }

    pub fn tip_hash(&self) -> Digest32 {
        *self.main.last().expect("genesis present")
    }

    pub fn header_count(&self) -> usize {
        self.headers.len()
    }

    /// Bytes held: encoded headers only, never block bodies.
    pub fn storage_bytes(&self) -> usize {
        self.headers
            .values()
            .map(|h| HEADER_FIXED_LEN + h.consensus_tag.len())
            .sum()
    }

    pub fn contains(&self, hash: &Digest32) -> bool {
        self.headers.contains_key(hash)
    }

    /// Link and proof checks a header can pass on its own. PoW headers must
    /// meet the target they carry and signed headers must verify; the
    /// ledger rules are left to full nodes.
    pub fn accept(&mut self, header: BlockHeader) -> Result<LightOutcome, LightError> {
        let hash = header.hash();
        if self.headers.contains_key(&hash) {
            return Err(LightError::Duplicate);
        }
        let parent = self.headers.get(&header.prev_hash).ok_or(LightError::UnknownParent)?;
        if header.height != parent.height + 1 || header.timestamp <= parent.timestamp {
            return Err(LightError::BadLink);
        }
        let proof_ok = match ConsensusTag::decode(&header.consensus_tag) {
            Ok(ConsensusTag::Pow { target }) => target.is_met_by(&hash),
            Ok(tag) => verify_header_signature(&header, &tag),
            Err(_) => false,
        };
        if !proof_ok {
            return Err(LightError::BadProof);
        }
        let height = header.height;
        let extends = header.prev_hash == self.tip_hash();
        self.headers.insert(hash, header);
        if extends {
            self.main.push(hash);
            return Ok(LightOutcome::Extended);
        }
        if height <= self.height() {
            return Ok(LightOutcome::Side);
        }
        let mut branch = vec![hash];
        let mut cur = self.headers[&hash].prev_hash;
        while self.main.get(self.headers[&cur].height as usize) != Some(&cur) {
            branch.push(cur);
            cur = self.headers[&cur].prev_hash;
        }
        let fork = self.headers[&cur].height;
        let depth = self.height() - fork;
        self.main.truncate(fork as usize + 1);
        self.main.extend(branch.into_iter().rev());
        Ok(LightOutcome::Reorganized { depth })
    }

    /// Verify a full node's inclusion proof against the tracked headers and
    /// return how many blocks sit on top of the including block.
    pub fn confirm(&self, tx_id: &Digest32, p: &InclusionProof) -> Result<u64, LightError> {
        let header = self.headers.get(&p.block_hash).ok_or(LightError::NotOnChain(p.block_hash))?;
        if self.main.get(header.height as usize) != Some(&p.block_hash) {
            return Err(LightError::NotOnChain(p.block_hash));
        }
        if !verify_proof(&header.data_hash, &tx_id.0, p.index, &p.proof) {
            return Err(LightError::BadMerkleProof);
        }
        Ok(self.height() - header.height)
    }
}
