use std::collections::HashMap;

use indexmap::IndexMap;
use thiserror::Error;

use super::tx::{OutPoint, Transaction};
use super::utxo::{validate_transaction, TxError, UtxoSet};
use crate::crypto::Digest32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MempoolError {
    #[error(transparent)]
    Invalid(#[from] TxError),
    #[error("transaction {0} already pending")]
    Duplicate(Digest32),
    #[error("coinbase transactions are never pooled")]
    Coinbase,
    #[error("input {outpoint:?} already spent by pending {existing}")]
    Conflict { outpoint: OutPoint, existing: Digest32 },
}

#[derive(Debug, Clone)]
pub struct PendingTx {
    pub tx: Transaction,
    pub fee: u64,
    pub size: usize,
}

/// Pending transactions in arrival order. No two pending transactions spend
/// the same outpoint.
#[derive(Debug, Clone, Default)]
pub struct Mempool {
    txs: IndexMap<Digest32, PendingTx>,
    spenders: HashMap<OutPoint, Digest32>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn contains(&self, id: &Digest32) -> bool {
        self.txs.contains_key(id)
    }

    pub fn get(&self, id: &Digest32) -> Option<&PendingTx> {
        self.txs.get(id)
    }

    /// Pending transactions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = (&Digest32, &PendingTx)> {
        self.txs.iter()
    }

    pub fn spender_of(&self, op: &OutPoint) -> Option<&Digest32> {
        self.spenders.get(op)
    }

    pub fn add(&mut self, tx: Transaction, utxo: &UtxoSet) -> Result<Digest32, MempoolError> {
        if tx.is_coinbase() {
            return Err(MempoolError::Coinbase);
        }
        let id = tx.tx_id();
        if self.txs.contains_key(&id) {
            return Err(MempoolError::Duplicate(id));
        }
        let v = validate_transaction(&tx, utxo)?;
        for input in &tx.inputs {
            let op = input.outpoint();
            if let Some(existing) = self.spenders.get(&op) {
                return Err(MempoolError::Conflict {
                    outpoint: op,
                    existing: *existing,
                });
            }
        }
        for input in &tx.inputs {
            self.spenders.insert(input.outpoint(), id);
        }
        let size = tx.encoded_len();
        self.txs.insert(id, PendingTx { tx, fee: v.fee, size });
        Ok(id)
    }

    pub fn remove(&mut self, id: &Digest32) -> Option<PendingTx> {
        let p = self.txs.shift_remove(id)?;
        for input in &p.tx.inputs {
            self.spenders.remove(&input.outpoint());
        }
        Some(p)
    }

    /// Drop transactions included in a newly adopted block, and any pending
    /// transaction that spends an outpoint the block spent.
    pub fn remove_confirmed(&mut self, block_txs: &[Transaction]) -> usize {
        let mut removed = 0;
        for tx in block_txs {
            if self.remove(&tx.tx_id()).is_some() {
                removed += 1;
            }
            for input in &tx.inputs {
                if let Some(other) = self.spenders.get(&input.outpoint()).copied() {
                    self.remove(&other);
                    removed += 1;
                }
            }
        }
        removed
    }

    /// Return transactions from orphaned blocks to the pool. Coinbase
    /// transactions and those already on the new chain are skipped; the rest
    /// must still validate against `utxo`.
    pub fn reinsert(
        &mut self,
        orphaned: &[Transaction],
        utxo: &UtxoSet,
        is_confirmed: impl Fn(&Digest32) -> bool,
    ) -> Vec<Digest32> {
        let mut back = Vec::new();
        for tx in orphaned {
            if tx.is_coinbase() || is_confirmed(&tx.tx_id()) {
                continue;
            }
            if let Ok(id) = self.add(tx.clone(), utxo) {
                back.push(id);
            }
        }
        back
    }

    /// Evict everything whose inputs are no longer spendable in `utxo`,
    /// such as spends of outputs a reorganisation removed. Signatures were
    /// checked on entry and an outpoint always names the same output, so
    /// only input presence is rechecked. Returns the evicted ids.
    pub fn revalidate(&mut self, utxo: &UtxoSet) -> Vec<Digest32> {
        let stale: Vec<Digest32> = self
            .txs
            .iter()
            .filter(|(_, p)| {
                p.tx.inputs
                    .iter()
                    .any(|i| utxo.get(&i.outpoint()).is_none_or(|e| e.locked))
            })
            .map(|(id, _)| *id)
            .collect();
        for id in &stale {
            self.remove(id);
        }
        stale
    }

    /// Oldest-first selection that fits in `max_bytes` and passes `accept`.
    pub fn select(
        &self,
        max_bytes: usize,
        mut accept: impl FnMut(&Transaction) -> bool,
    ) -> Vec<Transaction> {
        let mut used = 0usize;
        let mut out = Vec::new();
        for p in self.txs.values() {
            if used + p.size > max_bytes {
                continue;
            }
            if !accept(&p.tx) {
                continue;
            }
            used += p.size;
            out.push(p.tx.clone());
        }
        out
    }
}
