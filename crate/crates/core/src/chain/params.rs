use serde::{Deserialize, Serialize};

use super::block::{Block, BlockHeader};
use crate::consensus::ConsensusParams;
use crate::crypto::{Address, Digest32};
use crate::ledger::{Transaction, TxOutput, MAX_SUPPLY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Allocation {
    pub address: Address,
    pub amount: u64,
    /// Created as locked stake rather than spendable funds.
    #[serde(default)]
    pub staked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainParams {
    /// Blocks on top before a transaction counts as confirmed (k).
    pub confirmation_depth: u64,
    pub block_subsidy: u64,
    pub max_block_data_bytes: u64,
    pub rule_version: u16,
    /// Entropy for stake, reputation and PoET draws.
    pub seed: u64,
    pub genesis_allocation: Vec<Allocation>,
    pub consensus: ConsensusParams,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            confirmation_depth: 6,
            block_subsidy: 50,
            max_block_data_bytes: 100_000,
            rule_version: 1,
            seed: 0,
            genesis_allocation: Vec::new(),
            consensus: ConsensusParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("genesis allocation totals {0}, above the supply cap")]
pub struct GenesisError(pub u128);

impl ChainParams {
    pub fn genesis_total(&self) -> u128 {
        self.genesis_allocation.iter().map(|a| a.amount as u128).sum()
    }

    /// Configuration problems as (key, message) pairs.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.confirmation_depth == 0 {
            out.push(("chain.confirmation_depth".into(), "must be at least 1".into()));
        }
        if self.max_block_data_bytes < 64 {
            out.push(("chain.max_block_data_bytes".into(), "too small to hold a coinbase".into()));
        }
        if self.genesis_total() > MAX_SUPPLY as u128 {
            out.push(("chain.genesis_allocation".into(), "exceeds the supply cap".into()));
        }
        out.extend(self.consensus.problems());
        out
    }
}

/// Height 0, zero parent hash, one coinbase paying the allocation, timestamp
/// and nonce 0, empty consensus tag.
pub fn make_genesis(params: &ChainParams) -> Result<Block, GenesisError> {
    let total = params.genesis_total();
    if total > MAX_SUPPLY as u128 {
        return Err(GenesisError(total));
    }
    let coinbase = Transaction::coinbase(
        0,
        params
            .genesis_allocation
            .iter()
            .map(|a| TxOutput {
                amount: a.amount,
                recipient: a.address,
            })
            .collect(),
    );
    let header = BlockHeader {
        height: 0,
        prev_hash: Digest32::ZERO,
        data_hash: Digest32::ZERO,
        timestamp: 0,
        size: 0,
        nonce: 0,
        rule_version: params.rule_version,
        consensus_tag: Vec::new(),
    };
    Ok(Block::assemble(header, vec![coinbase]))
}
