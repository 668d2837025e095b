use std::collections::HashMap;

use thiserror::Error;

use super::block::{Block, BlockHeader};
use super::params::{make_genesis, ChainParams, GenesisError};
use super::rules::ValidationRules;
use super::state::{BlockUndo, ChainState};
use super::validate::{check_structure, BlockError};
use crate::consensus::{check_header_consensus, retarget_window, ConsensusParams};
use crate::crypto::Digest32;
use crate::ledger::Mempool;

#[derive(Debug, Clone, PartialEq)]
pub enum BlockStatus {
    /// On the adopted chain.
    Adopted,
    /// Passed header checks; ledger rules not yet applied, or applied once
    /// and since orphaned.
    Side,
    Invalid(BlockError),
}

#[derive(Debug, Clone)]
struct Entry {
    block: Block,
    status: BlockStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reorg {
    /// Height of the last block both chains share.
    pub fork_height: u64,
    /// Former adopted blocks, lowest first.
    pub orphaned: Vec<Block>,
    /// Newly adopted blocks, lowest first.
    pub adopted: Vec<Block>,
}

impl Reorg {
    pub fn depth(&self) -> u64 {
        self.orphaned.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppendOutcome {
    Extended { hash: Digest32, height: u64 },
    SideBranch { hash: Digest32, height: u64 },
    Reorganized(Reorg),
    Rejected(BlockError),
}

impl AppendOutcome {
    pub fn is_accepted(&self) -> bool {
        !matches!(self, AppendOutcome::Rejected(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("height {height} is above the tip at {tip}")]
    AboveTip { height: u64, tip: u64 },
    #[error("height {height} is below the current checkpoint at {current}")]
    BelowCurrent { height: u64, current: u64 },
}

/// Every block a node has accepted, the adopted chain through them, and the
/// state at its tip. The longest chain by block count wins; on a tie the
/// chain seen first stays.
#[derive(Debug, Clone)]
pub struct ChainStore {
    params: ChainParams,
    rules: ValidationRules,
    entries: HashMap<Digest32, Entry>,
    order: Vec<Digest32>,
    chain: Vec<Digest32>,
    undos: Vec<BlockUndo>,
    state: ChainState,
    checkpoint: Option<(u64, Digest32)>,
}

impl ChainStore {
    pub fn new(params: ChainParams, rules: ValidationRules) -> Result<Self, GenesisError> {
        let genesis = make_genesis(&params)?;
        let state = ChainState::from_genesis(&genesis, &params);
        let hash = genesis.hash();
        let mut entries = HashMap::new();
        entries.insert(
            hash,
            Entry {
                block: genesis,
                status: BlockStatus::Adopted,
            },
        );
        Ok(Self {
            params,
            rules,
            entries,
            order: vec![hash],
            chain: vec![hash],
            undos: Vec::new(),
            state,
            checkpoint: None,
        })
    }

    /// Store using the parameters' own rules.
    pub fn with_params(params: ChainParams) -> Result<Self, GenesisError> {
        let rules = ValidationRules::from_params(&params);
        Self::new(params, rules)
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn rules(&self) -> &ValidationRules {
        &self.rules
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn height(&self) -> u64 {
        (self.chain.len() - 1) as u64
    }

    pub fn tip_hash(&self) -> Digest32 {
        *self.chain.last().expect("genesis is always present")
    }

    pub fn tip(&self) -> &Block {
        &self.entries[&self.tip_hash()].block
    }

    pub fn genesis(&self) -> &Block {
        &self.entries[&self.chain[0]].block
    }

    pub fn contains(&self, hash: &Digest32) -> bool {
        self.entries.contains_key(hash)
    }

    /// Number of stored blocks, genesis included.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn block(&self, hash: &Digest32) -> Option<&Block> {
        self.entries.get(hash).map(|e| &e.block)
    }

    pub fn status(&self, hash: &Digest32) -> Option<&BlockStatus> {
        self.entries.get(hash).map(|e| &e.status)
    }

    /// Adopted block at `height`.
    pub fn block_at(&self, height: u64) -> Option<&Block> {
        let hash = self.chain.get(height as usize)?;
        Some(&self.entries[hash].block)
    }

    pub fn hash_at(&self, height: u64) -> Option<Digest32> {
        self.chain.get(height as usize).copied()
    }

    /// Adopted chain from genesis to tip.
    pub fn main_chain(&self) -> impl Iterator<Item = &Block> + '_ {
        self.chain.iter().map(|h| &self.entries[h].block)
    }

    /// All stored blocks in the order they were accepted.
    pub fn blocks_in_order(&self) -> impl Iterator<Item = &Block> + '_ {
        self.order.iter().map(|h| &self.entries[h].block)
    }

    fn is_adopted(&self, hash: &Digest32, height: u64) -> bool {
        self.chain.get(height as usize) == Some(hash)
    }

    /// Header at `height` on the branch ending at `from` (inclusive).
    fn ancestor(&self, from: &Digest32, height: u64) -> Option<&BlockHeader> {
        let mut cur = &self.entries.get(from)?.block;
        while cur.header.height > height {
            if self.is_adopted(&cur.hash(), cur.header.height) {
                return self.block_at(height).map(|b| &b.header);
            }
            cur = &self.entries.get(&cur.header.prev_hash)?.block;
        }
        (cur.header.height == height).then_some(&cur.header)
    }

    fn pow_window(&self, parent_hash: &Digest32, height: u64) -> Vec<BlockHeader> {
        let ConsensusParams::Pow(p) = &self.params.consensus else {
            return Vec::new();
        };
        match retarget_window(p, height) {
            Some(range) => range
                .filter_map(|h| self.ancestor(parent_hash, h).cloned())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Header and structure checks that do not need ledger state.
    pub fn precheck(&self, block: &Block) -> Result<(), BlockError> {
        let hash = block.hash();
        if self.entries.contains_key(&hash) {
            return Err(BlockError::Duplicate);
        }
        let prev = block.header.prev_hash;
        let parent = self.entries.get(&prev).ok_or(BlockError::UnknownParent(prev))?;
        if matches!(parent.status, BlockStatus::Invalid(_)) {
            return Err(BlockError::InvalidAncestor);
        }
        if let Some((cp, _)) = self.checkpoint {
            if block.header.height <= cp {
                return Err(BlockError::Checkpoint(cp));
            }
        }
        let parent = &parent.block.header;
        check_structure(block, parent, &self.rules)?;
        let window = self.pow_window(&prev, block.header.height);
        check_header_consensus(&block.header, parent, &self.params.consensus, self.params.seed, &window)?;
        Ok(())
    }

    pub fn append_block(&mut self, block: Block) -> AppendOutcome {
        if let Err(e) = self.precheck(&block) {
            return AppendOutcome::Rejected(e);
        }
        let hash = block.hash();
        let height = block.header.height;
        let extends_tip = block.header.prev_hash == self.tip_hash();
        self.entries.insert(
            hash,
            Entry {
                block,
                status: BlockStatus::Side,
            },
        );
        self.order.push(hash);

        if extends_tip {
            return match self.connect_tip(&hash) {
                Ok(()) => AppendOutcome::Extended { hash, height },
                Err(e) => {
                    self.mark_invalid(&hash, e.clone());
                    AppendOutcome::Rejected(e)
                }
            };
        }
        if height > self.height() {
            return self.reorganize(hash);
        }
        AppendOutcome::SideBranch { hash, height }
    }

    fn connect_tip(&mut self, hash: &Digest32) -> Result<(), BlockError> {
        let parent = self.tip().header.clone();
        let entry = &self.entries[hash];
        let undo = self.state.connect(&entry.block, &parent, &self.params)?;
        self.undos.push(undo);
        self.chain.push(*hash);
        self.entries.get_mut(hash).expect("present").status = BlockStatus::Adopted;
        Ok(())
    }

    fn disconnect_tip(&mut self) -> Block {
        let hash = self.chain.pop().expect("never disconnects genesis");
        let undo = self.undos.pop().expect("undo per block");
        let entry = self.entries.get_mut(&hash).expect("present");
        entry.status = BlockStatus::Side;
        self.state.disconnect(&entry.block, &undo);
        entry.block.clone()
    }

    fn mark_invalid(&mut self, hash: &Digest32, reason: BlockError) {
        if let Some(e) = self.entries.get_mut(hash) {
            e.status = BlockStatus::Invalid(reason);
        }
    }

    fn reorganize(&mut self, new_tip: Digest32) -> AppendOutcome {
        let mut branch = Vec::new();
        let mut cur = new_tip;
        loop {
            let e = &self.entries[&cur];
            if self.is_adopted(&cur, e.block.header.height) {
                break;
            }
            if matches!(e.status, BlockStatus::Invalid(_)) {
                self.mark_invalid(&new_tip, BlockError::InvalidAncestor);
                return AppendOutcome::Rejected(BlockError::InvalidAncestor);
            }
            branch.push(cur);
            cur = e.block.header.prev_hash;
        }
        branch.reverse();
        let fork_height = self.entries[&cur].block.header.height;
        if let Some((cp, _)) = self.checkpoint {
            if fork_height < cp {
                let err = BlockError::Checkpoint(cp);
                self.mark_invalid(&new_tip, err.clone());
                return AppendOutcome::Rejected(err);
            }
        }

        let mut orphaned = Vec::new();
        while self.height() > fork_height {
            orphaned.push(self.disconnect_tip());
        }
        orphaned.reverse();

        for (j, hash) in branch.iter().enumerate() {
            if let Err(e) = self.connect_tip(hash) {
                self.mark_invalid(hash, e.clone());
                for later in &branch[j + 1..] {
                    self.mark_invalid(later, BlockError::InvalidAncestor);
                }
                while self.height() > fork_height {
                    self.disconnect_tip();
                }
                for b in &orphaned {
                    self.connect_tip(&b.hash())
                        .expect("previously adopted blocks reconnect");
                }
                return AppendOutcome::Rejected(e);
            }
        }
        let adopted = branch.iter().map(|h| self.entries[h].block.clone()).collect();
        AppendOutcome::Reorganized(Reorg {
            fork_height,
            orphaned,
            adopted,
        })
    }

    /// Pin the adopted block at `height`: no later block may replace it or
    /// anything below it.
    pub fn set_checkpoint(&mut self, height: u64) -> Result<Digest32, CheckpointError> {
        if height > self.height() {
            return Err(CheckpointError::AboveTip {
                height,
                tip: self.height(),
            });
        }
        if let Some((cur, _)) = self.checkpoint {
            if height < cur {
                return Err(CheckpointError::BelowCurrent { height, current: cur });
            }
        }
        let hash = self.chain[height as usize];
        self.checkpoint = Some((height, hash));
        Ok(hash)
    }

    pub fn checkpoint(&self) -> Option<(u64, Digest32)> {
        self.checkpoint
    }

    /// Blocks on top of the one that included `tx_id`, or `None` if it is
    /// not on the adopted chain.
    pub fn depth_of(&self, tx_id: &Digest32) -> Option<u64> {
        self.state.tx_height(tx_id).map(|h| self.height() - h)
    }

    /// Included with at least `confirmation_depth` blocks on top.
    pub fn is_confirmed(&self, tx_id: &Digest32) -> bool {
        self.depth_of(tx_id)
            .is_some_and(|d| d >= self.params.confirmation_depth)
    }

    /// Bring a mempool in line after `outcome`: drop what the new blocks
    /// include, return orphaned transactions that are still valid, and evict
    /// anything the new state invalidates.
    pub fn update_mempool(&self, mempool: &mut Mempool, outcome: &AppendOutcome) {
        match outcome {
            AppendOutcome::Extended { hash, .. } => {
                mempool.remove_confirmed(&self.entries[hash].block.transactions);
                mempool.revalidate(&self.state.utxo);
            }
            AppendOutcome::Reorganized(r) => {
                for b in &r.adopted {
                    mempool.remove_confirmed(&b.transactions);
                }
                let orphaned: Vec<_> = r
                    .orphaned
                    .iter()
                    .flat_map(|b| b.transactions.iter().filter(|t| !t.is_coinbase()).cloned())
                    .collect();
                mempool.reinsert(&orphaned, &self.state.utxo, |id| self.state.tx_height(id).is_some());
                mempool.revalidate(&self.state.utxo);
            }
            AppendOutcome::SideBranch { .. } | AppendOutcome::Rejected(_) => {}
        }
    }
}
