use super::block::{Block, BlockHeader};
use super::store::ChainStore;
use crate::consensus::{
    expected_target, poet_draw, pow_mine, retarget_window, sign_header, slot_index, slot_publisher, slot_start,
    wait_ticks, ConsensusParams, ConsensusTag, Model, Target,
};
use crate::crypto::{Address, KeyPair, PuzzleError};
use crate::ledger::{Transaction, TxOutput};

impl ChainStore {
    /// Target the next block on the tip must carry, for PoW chains.
    pub fn next_target(&self) -> Option<Target> {
        let ConsensusParams::Pow(p) = &self.params().consensus else {
            return None;
        };
        let height = self.height() + 1;
        let window: Vec<BlockHeader> = retarget_window(p, height)
            .map(|r| r.filter_map(|h| self.block_at(h).map(|b| b.header.clone())).collect())
            .unwrap_or_default();
        Some(expected_target(p, &self.tip().header, &window))
    }

    /// Unsealed block on the current tip: a coinbase paying subsidy plus
    /// `fees` to `reward_to`, then `txs`. PoW blocks get their target tag;
    /// other models are left for [`seal_signed`].
    pub fn candidate(&self, txs: Vec<Transaction>, fees: u64, reward_to: Address, timestamp: u64) -> Block {
        let parent = &self.tip().header;
        let height = parent.height + 1;
        let reward = self.params().block_subsidy.saturating_add(fees);
        let outputs = if reward > 0 {
            vec![TxOutput {
                amount: reward,
                recipient: reward_to,
            }]
        } else {
            Vec::new()
        };
        let mut all = Vec::with_capacity(txs.len() + 1);
        all.push(Transaction::coinbase(height, outputs));
        all.extend(txs);
        let consensus_tag = match self.next_target() {
            Some(target) => ConsensusTag::Pow { target }.encode(),
            None => Vec::new(),
        };
        let header = BlockHeader {
            height,
            prev_hash: parent.hash(),
            data_hash: Default::default(),
            timestamp,
            size: 0,
            nonce: 0,
            rule_version: self.rules().publish_version(height),
            consensus_tag,
        };
        Block::assemble(header, all)
    }
}

/// Search nonces `start..=end` for one that meets the block's own target.
pub fn seal_pow(mut block: Block, start: u64, end: u64) -> Result<(Block, u64), PuzzleError> {
    let target = match ConsensusTag::decode(&block.header.consensus_tag) {
        Ok(ConsensusTag::Pow { target }) => target,
        _ => Target::MAX,
    };
    let (header, attempts) = pow_mine(&block.header, &target, start, end)?;
    block.header = header;
    Ok((block, attempts))
}

pub fn seal_signed(mut block: Block, model: Model, key: &KeyPair, extra: Vec<u8>) -> Block {
    sign_header(&mut block.header, model, key, extra);
    block
}

/// When and with what tag payload a node may publish on the current tip.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishTicket {
    pub timestamp: u64,
    pub slot: u64,
    /// Bytes for the tag's `extra` field (the wait certificate under PoET).
    pub extra: Vec<u8>,
}

/// Slots examined when looking ahead for a node's next turn.
pub const SLOT_SEARCH_LIMIT: u64 = 4096;

impl ChainStore {
    /// Earliest turn for `publisher` on the current tip at or after
    /// `not_before`. `None` for PoW, or if no turn falls within
    /// [`SLOT_SEARCH_LIMIT`] slots.
    pub fn next_ticket(&self, publisher: &Address, not_before: u64) -> Option<PublishTicket> {
        let params = self.params();
        let parent = &self.tip().header;
        match &params.consensus {
            ConsensusParams::Pow(_) => None,
            ConsensusParams::Poet(p) => {
                if !p.publishers.contains(publisher) {
                    return None;
                }
                let cert = poet_draw(publisher, parent.height, params.seed, p.mean_wait);
                let timestamp = (parent.timestamp + wait_ticks(&cert)).max(not_before);
                Some(PublishTicket {
                    timestamp,
                    slot: 0,
                    extra: cert.encode(),
                })
            }
            other => {
                let (iv, len) = other.slot_timing().expect("slot model");
                let first = if not_before <= parent.timestamp + iv {
                    0
                } else {
                    slot_index(iv, len, parent.timestamp, not_before).ok()?
                        + u64::from(!(not_before - parent.timestamp - iv).is_multiple_of(len.max(1)))
                };
                let stakes = self.state().stake_view();
                (first..first + SLOT_SEARCH_LIMIT).find_map(|slot| {
                    let w = slot_publisher(other, params.seed, &stakes, parent, slot).ok()?;
                    (w.publisher == *publisher).then(|| PublishTicket {
                        timestamp: slot_start(iv, len, parent.timestamp, slot),
                        slot,
                        extra: Vec::new(),
                    })
                })
            }
        }
    }

    /// Signed block for `key` at `ticket` on the current tip.
    pub fn signed_block(&self, key: &KeyPair, ticket: &PublishTicket, txs: Vec<Transaction>, fees: u64) -> Block {
        let b = self.candidate(txs, fees, key.address(crate::crypto::USER_ADDRESS_VERSION), ticket.timestamp);
        seal_signed(b, self.params().consensus.model(), key, ticket.extra.clone())
    }
}
