use thiserror::Error;

use super::block::{block_data_len, compute_data_hash, Block, BlockHeader};
use super::rules::ValidationRules;
use crate::codec::DecodeError;
use crate::consensus::ConsensusError;
use crate::contracts::ContractError;
use crate::crypto::Digest32;
use crate::ledger::TxError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("block does not decode: {0}")]
    Malformed(#[from] DecodeError),
    #[error("block is already known")]
    Duplicate,
    #[error("parent {0} is unknown")]
    UnknownParent(Digest32),
    #[error("an ancestor was rejected")]
    InvalidAncestor,
    #[error("previous hash does not match the parent")]
    PrevHash,
    #[error("height {got}, expected {expected}")]
    Height { expected: u64, got: u64 },
    #[error("data hash does not match the transactions")]
    DataHash,
    #[error("size field {declared} but data is {actual} bytes")]
    SizeField { declared: u64, actual: u64 },
    #[error("block data is {size} bytes, limit {limit}")]
    TooLarge { size: u64, limit: u64 },
    #[error("rule version {0} is not accepted here")]
    RuleVersion(u16),
    #[error("timestamp {got} is not after parent timestamp {parent}")]
    Timestamp { parent: u64, got: u64 },
    #[error("consensus: {0}")]
    Consensus(#[from] ConsensusError),
    #[error("first transaction is not a coinbase")]
    NoCoinbase,
    #[error("transaction {0} is a second coinbase")]
    ExtraCoinbase(usize),
    #[error("coinbase payload does not carry the block height")]
    CoinbaseHeight,
    #[error("coinbase claims {claimed}, allowed {allowed}")]
    Reward { claimed: u128, allowed: u128 },
    #[error("transaction {index}: {error}")]
    Tx { index: usize, error: TxError },
    #[error("transaction {index}: {error}")]
    Contract { index: usize, error: ContractError },
    #[error("block would replace checkpointed history at height {0}")]
    Checkpoint(u64),
    #[error("genesis does not match the chain parameters")]
    Genesis,
}

impl BlockError {
    /// Short stable name for logs and metrics.
    pub fn code(&self) -> &'static str {
        match self {
            BlockError::Malformed(_) => "malformed",
            BlockError::Duplicate => "duplicate",
            BlockError::UnknownParent(_) => "unknown_parent",
            BlockError::InvalidAncestor => "invalid_ancestor",
            BlockError::PrevHash => "prev_hash",
            BlockError::Height { .. } => "height",
            BlockError::DataHash => "data_hash",
            BlockError::SizeField { .. } => "size_field",
            BlockError::TooLarge { .. } => "too_large",
            BlockError::RuleVersion(_) => "rule_version",
            BlockError::Timestamp { .. } => "timestamp",
            BlockError::Consensus(e) => e.code(),
            BlockError::NoCoinbase => "no_coinbase",
            BlockError::ExtraCoinbase(_) => "extra_coinbase",
            BlockError::CoinbaseHeight => "coinbase_height",
            BlockError::Reward { .. } => "reward",
            BlockError::Tx { .. } => "bad_transaction",
            BlockError::Contract { .. } => "bad_contract_call",
            BlockError::Checkpoint(_) => "checkpoint",
            BlockError::Genesis => "genesis",
        }
    }
}

/// Link, height, data hash, size and version rules against the parent.
pub fn check_structure(block: &Block, parent: &BlockHeader, rules: &ValidationRules) -> Result<(), BlockError> {
    let h = &block.header;
    if h.prev_hash != parent.hash() {
        return Err(BlockError::PrevHash);
    }
    if h.height != parent.height + 1 {
        return Err(BlockError::Height {
            expected: parent.height + 1,
            got: h.height,
        });
    }
    if h.data_hash != compute_data_hash(&block.transactions) {
        return Err(BlockError::DataHash);
    }
    let actual = block_data_len(&block.transactions);
    if h.size != actual {
        return Err(BlockError::SizeField {
            declared: h.size,
            actual,
        });
    }
    let limit = rules.size_limit(h.height);
    if actual > limit {
        return Err(BlockError::TooLarge { size: actual, limit });
    }
    if !rules.accepts_version(h.height, h.rule_version) {
        return Err(BlockError::RuleVersion(h.rule_version));
    }
    if h.timestamp <= parent.timestamp {
        return Err(BlockError::Timestamp {
            parent: parent.timestamp,
            got: h.timestamp,
        });
    }
    Ok(())
}
