use std::collections::{BTreeMap, HashMap};

use super::block::{Block, BlockHeader};
use super::params::ChainParams;
use super::validate::BlockError;
use crate::consensus::{check_stake_eligibility, Model, StakeView};
use crate::contracts::{ContractRegistry, ContractUndo};
use crate::crypto::Digest32;
use crate::ledger::{apply_tx, revert_tx, OutPoint, TxKind, TxUndo, UtxoSet};

/// Everything needed to disconnect a block again.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockUndo {
    txs: Vec<TxUndo>,
    contracts: Vec<(usize, ContractUndo)>,
    ages: Vec<(OutPoint, Option<u64>)>,
    claimed: u128,
    fees: u128,
}

impl BlockUndo {
    pub fn fees(&self) -> u128 {
        self.fees
    }
}

/// Ledger and contract state at the tip of the adopted chain.
#[derive(Debug, Clone, Default)]
pub struct ChainState {
    pub utxo: UtxoSet,
    pub contracts: ContractRegistry,
    /// Coin-age origins that differ from the entry's creation height.
    pub age_origins: BTreeMap<OutPoint, u64>,
    tx_heights: HashMap<Digest32, u64>,
    genesis_total: u128,
    claimed: u128,
    fees: u128,
}

impl ChainState {
    pub fn from_genesis(genesis: &Block, params: &ChainParams) -> Self {
        let mut st = ChainState::default();
        let coinbase = &genesis.transactions[0];
        apply_tx(coinbase, 0, &mut st.utxo).expect("genesis coinbase applies to an empty set");
        let id = coinbase.tx_id();
        for (i, a) in params.genesis_allocation.iter().enumerate() {
            if a.staked {
                st.utxo.lock(&OutPoint::new(id, i as u32));
            }
        }
        st.tx_heights.insert(id, 0);
        st.genesis_total = params.genesis_total();
        st
    }

    /// Height the transaction was included at on the adopted chain.
    pub fn tx_height(&self, tx_id: &Digest32) -> Option<u64> {
        self.tx_heights.get(tx_id).copied()
    }

    pub fn stake_view(&self) -> StakeView {
        StakeView::from_utxo(&self.utxo, &self.age_origins)
    }

    /// Genesis plus every coinbase claim, minus fees paid by spenders.
    /// Always equals the UTXO total.
    pub fn expected_supply(&self) -> u128 {
        self.genesis_total + self.claimed - self.fees
    }

    pub fn genesis_total(&self) -> u128 {
        self.genesis_total
    }

    pub fn total_fees(&self) -> u128 {
        self.fees
    }

    /// Validate `block` on top of this state (whose tip is `parent`) and apply
    /// it. Structure and header-level consensus must already have passed. On
    /// error the state is unchanged.
    pub fn connect(&mut self, block: &Block, parent: &BlockHeader, params: &ChainParams) -> Result<BlockUndo, BlockError> {
        let h = block.header.height;
        let resets = match params.consensus.model() {
            Model::PosChain | Model::PosCoinage => check_stake_eligibility(
                &block.header,
                parent,
                &params.consensus,
                params.seed,
                &self.stake_view(),
            )?,
            _ => Vec::new(),
        };
        let txs = &block.transactions;
        match txs.first() {
            Some(cb) if cb.is_coinbase() => {
                if cb.payload != h.to_be_bytes() {
                    return Err(BlockError::CoinbaseHeight);
                }
            }
            _ => return Err(BlockError::NoCoinbase),
        }
        if let Some(i) = txs.iter().skip(1).position(|t| t.is_coinbase()) {
            return Err(BlockError::ExtraCoinbase(i + 1));
        }

        let mut undo = BlockUndo::default();
        for (index, tx) in txs.iter().enumerate() {
            let step = apply_tx(tx, h, &mut self.utxo)
                .map_err(|error| BlockError::Tx { index, error })
                .and_then(|(v, tu)| {
                    let c = match tx.kind {
                        TxKind::ContractDeploy => self.contracts.deploy(tx).map(|(_, u)| Some(u)),
                        TxKind::ContractCall => self.contracts.call(tx, v.fee).map(|(_, u)| Some(u)),
                        _ => Ok(None),
                    };
                    match c {
                        Ok(cu) => Ok((v, tu, cu)),
                        Err(error) => {
                            revert_tx(tx, &tu, &mut self.utxo);
                            Err(BlockError::Contract { index, error })
                        }
                    }
                });
            match step {
                Ok((v, tu, cu)) => {
                    undo.txs.push(tu);
                    if let Some(cu) = cu {
                        undo.contracts.push((index, cu));
                    }
                    undo.fees += v.fee as u128;
                }
                Err(e) => {
                    self.rollback(block, &undo);
                    return Err(e);
                }
            }
        }
        let claimed = txs[0].total_output().unwrap_or(u64::MAX) as u128;
        let allowed = params.block_subsidy as u128 + undo.fees;
        if claimed > allowed {
            self.rollback(block, &undo);
            return Err(BlockError::Reward { claimed, allowed });
        }
        undo.claimed = claimed;

        for op in resets {
            undo.ages.push((op, self.age_origins.insert(op, h)));
        }
        for tx in txs {
            self.tx_heights.insert(tx.tx_id(), h);
        }
        self.claimed += undo.claimed;
        self.fees += undo.fees;
        Ok(undo)
    }

    fn rollback(&mut self, block: &Block, undo: &BlockUndo) {
        for (index, cu) in undo.contracts.iter().rev() {
            debug_assert!(*index < undo.txs.len());
            self.contracts.revert(cu);
        }
        for (tx, tu) in block.transactions.iter().zip(&undo.txs).rev() {
            revert_tx(tx, tu, &mut self.utxo);
        }
    }

    /// Exact inverse of a successful [`ChainState::connect`].
    pub fn disconnect(&mut self, block: &Block, undo: &BlockUndo) {
        for (op, prior) in undo.ages.iter().rev() {
            match prior {
                Some(v) => self.age_origins.insert(*op, *v),
                None => self.age_origins.remove(op),
            };
        }
        for tx in &block.transactions {
            self.tx_heights.remove(&tx.tx_id());
        }
        self.claimed -= undo.claimed;
        self.fees -= undo.fees;
        self.rollback(block, undo);
    }
}
