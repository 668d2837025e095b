use thiserror::Error;

use super::block::{Block, BlockHeader};
use super::params::{make_genesis, ChainParams};
use super::rules::ValidationRules;
use super::state::ChainState;
use super::store::ChainStore;
use super::validate::{check_structure, BlockError};
use crate::consensus::{check_header_consensus, retarget_window, ConsensusParams};
use crate::crypto::Digest32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("no blocks to verify")]
    Empty,
    #[error("chain breaks at height {height}: {error}")]
    Broken { height: u64, error: BlockError },
    #[error("tip at height {height} hashes to {got}, expected {expected}")]
    TipMismatch {
        height: u64,
        expected: Digest32,
        got: Digest32,
    },
}

impl VerifyError {
    /// First height that fails, if any block does.
    pub fn height(&self) -> Option<u64> {
        match self {
            VerifyError::Broken { height, .. } | VerifyError::TipMismatch { height, .. } => Some(*height),
            VerifyError::Empty => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub blocks: usize,
    pub tip_height: u64,
    pub tip_hash: Digest32,
}

/// Replay a linear chain from genesis under full validation. `blocks[i]`
/// must sit at height `i`. When `expected_tip` is given, the last block's
/// hash must equal it; that is what exposes edits to the newest block,
/// which no later block commits to.
pub fn verify_blocks(
    blocks: &[Block],
    params: &ChainParams,
    rules: &ValidationRules,
    expected_tip: Option<Digest32>,
) -> Result<VerifyReport, VerifyError> {
    let first = blocks.first().ok_or(VerifyError::Empty)?;
    let genesis = make_genesis(params).map_err(|_| VerifyError::Broken {
        height: 0,
        error: BlockError::Genesis,
    })?;
    if *first != genesis {
        return Err(VerifyError::Broken {
            height: 0,
            error: BlockError::Genesis,
        });
    }
    let mut state = ChainState::from_genesis(first, params);
    let headers: Vec<&BlockHeader> = blocks.iter().map(|b| &b.header).collect();
    for (i, pair) in blocks.windows(2).enumerate() {
        let (parent, block) = (&pair[0], &pair[1]);
        let height = (i + 1) as u64;
        let broken = |error| VerifyError::Broken { height, error };
        check_structure(block, &parent.header, rules).map_err(broken)?;
        let window: Vec<BlockHeader> = match &params.consensus {
            ConsensusParams::Pow(p) => retarget_window(p, height)
                .map(|r| r.map(|h| headers[h as usize].clone()).collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        };
        check_header_consensus(&block.header, &parent.header, &params.consensus, params.seed, &window)
            .map_err(|e| broken(e.into()))?;
        state.connect(block, &parent.header, params).map_err(broken)?;
    }
    let tip = blocks.last().expect("non-empty");
    let tip_hash = tip.hash();
    if let Some(expected) = expected_tip {
        if expected != tip_hash {
            return Err(VerifyError::TipMismatch {
                height: tip.header.height,
                expected,
                got: tip_hash,
            });
        }
    }
    Ok(VerifyReport {
        blocks: blocks.len(),
        tip_height: tip.header.height,
        tip_hash,
    })
}

/// [`verify_blocks`] over raw encodings. A block that no longer decodes is
/// reported as broken at its index.
pub fn verify_encoded_blocks(
    encoded: &[Vec<u8>],
    params: &ChainParams,
    rules: &ValidationRules,
    expected_tip: Option<Digest32>,
) -> Result<VerifyReport, VerifyError> {
    let blocks = encoded
        .iter()
        .enumerate()
        .map(|(i, bytes)| {
            Block::decode(bytes).map_err(|e| VerifyError::Broken {
                height: i as u64,
                error: e.into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    verify_blocks(&blocks, params, rules, expected_tip)
}

/// Re-verify a store's adopted chain from genesis, anchored to its tip.
pub fn verify_chain(store: &ChainStore) -> Result<VerifyReport, VerifyError> {
    let blocks: Vec<Block> = store.main_chain().cloned().collect();
    verify_blocks(&blocks, store.params(), store.rules(), Some(store.tip_hash()))
}

/// Pick the adopted chain out of an unordered block set: the tallest block
/// seen first, walked back through parents. Stops early where a parent is
/// missing, so the result may not start at genesis.
pub fn longest_chain(blocks: &[Block]) -> Vec<Block> {
    use std::collections::HashMap;
    let by_hash: HashMap<Digest32, &Block> = blocks.iter().map(|b| (b.hash(), b)).collect();
    let Some(mut cur) = blocks.iter().fold(None::<&Block>, |best, b| match best {
        Some(x) if x.header.height >= b.header.height => Some(x),
        _ => Some(b),
    }) else {
        return Vec::new();
    };
    let mut out = vec![cur.clone()];
    while cur.header.height > 0 {
        match by_hash.get(&cur.header.prev_hash) {
            Some(p) if p.header.height + 1 == cur.header.height => {
                cur = p;
                out.push(cur.clone());
            }
            _ => break,
        }
    }
    out.reverse();
    out
}
