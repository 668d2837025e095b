use std::collections::BTreeMap;

use thiserror::Error;

use super::tx::{OutPoint, Transaction, TxKind, TxOutput, MAX_SUPPLY};
use crate::crypto::{derive_address, verify, Address, USER_ADDRESS_VERSION};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtxoEntry {
    pub output: TxOutput,
    pub locked: bool,
    pub created_height: u64,
}

/// Unspent outputs keyed by outpoint. Iteration order is the outpoint order,
/// so two sets with the same contents compare and iterate identically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UtxoSet {
    entries: BTreeMap<OutPoint, UtxoEntry>,
}

/// Validation failures, in the order the rules are checked.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("malformed transaction: {0}")]
    Malformed(&'static str),
    #[error("input {0:?} does not reference an unspent output")]
    UnknownInput(OutPoint),
    #[error("input {0:?} is locked stake")]
    LockedInput(OutPoint),
    #[error("signature on input {0} does not verify")]
    BadSignature(usize),
    #[error("input {0} is signed by a key that does not own the output")]
    WrongOwner(usize),
    #[error("outputs {outputs} exceed inputs {inputs}")]
    ValueCreated { inputs: u64, outputs: u64 },
    #[error("outpoint {0:?} spent twice in one transaction")]
    DuplicateInput(OutPoint),
    #[error("output {0:?} already exists")]
    OutputExists(OutPoint),
}

/// A transaction that passed validation, with its fee (inputs − outputs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validated {
    pub fee: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Balance {
    pub unlocked: u64,
    pub locked_stake: u64,
}

/// Entries removed when a transaction was applied, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TxUndo {
    pub spent: Vec<(OutPoint, UtxoEntry)>,
}

impl UtxoSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, op: &OutPoint) -> Option<&UtxoEntry> {
        self.entries.get(op)
    }

    pub fn contains(&self, op: &OutPoint) -> bool {
        self.entries.contains_key(op)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OutPoint, &UtxoEntry)> {
        self.entries.iter()
    }

    /// Sum of every entry, locked or not.
    pub fn total(&self) -> u128 {
        self.entries.values().map(|e| e.output.amount as u128).sum()
    }

    pub fn total_locked(&self) -> u128 {
        self.entries
            .values()
            .filter(|e| e.locked)
            .map(|e| e.output.amount as u128)
            .sum()
    }

    pub fn owned_by<'a>(
        &'a self,
        address: &'a Address,
    ) -> impl Iterator<Item = (&'a OutPoint, &'a UtxoEntry)> + 'a {
        self.entries
            .iter()
            .filter(move |(_, e)| e.output.recipient == *address)
    }

    /// Mark an existing entry as locked stake. Returns false if absent.
    pub fn lock(&mut self, op: &OutPoint) -> bool {
        match self.entries.get_mut(op) {
            Some(e) => {
                e.locked = true;
                true
            }
            None => false,
        }
    }

    fn insert_new(&mut self, op: OutPoint, entry: UtxoEntry) -> Result<(), TxError> {
        use std::collections::btree_map::Entry;
        match self.entries.entry(op) {
            Entry::Occupied(_) => Err(TxError::OutputExists(op)),
            Entry::Vacant(v) => {
                v.insert(entry);
                Ok(())
            }
        }
    }
}

fn check_format(tx: &Transaction) -> Result<u64, TxError> {
    match tx.kind {
        TxKind::Coinbase => {
            if !tx.inputs.is_empty() {
                return Err(TxError::Malformed("coinbase has inputs"));
            }
            if tx.payload.len() != 8 {
                return Err(TxError::Malformed("coinbase payload must be the block height"));
            }
        }
        _ if tx.inputs.is_empty() => return Err(TxError::Malformed("no inputs")),
        TxKind::Transfer if !tx.payload.is_empty() => {
            return Err(TxError::Malformed("transfer carries a payload"))
        }
        TxKind::Stake if !tx.payload.is_empty() => {
            return Err(TxError::Malformed("stake carries a payload"))
        }
        TxKind::Stake if tx.outputs.is_empty() => {
            return Err(TxError::Malformed("stake has no outputs"))
        }
        TxKind::ContractDeploy if tx.payload.is_empty() => {
            return Err(TxError::Malformed("deploy without code"))
        }
        _ => {}
    }
    if tx.outputs.iter().any(|o| o.amount > MAX_SUPPLY) {
        return Err(TxError::Malformed("output amount above supply cap"));
    }
    match tx.total_output() {
        Some(t) if t <= MAX_SUPPLY => Ok(t),
        _ => Err(TxError::Malformed("output sum above supply cap")),
    }
}

/// Check `tx` against `utxo` without changing it. Rules run in a fixed
/// order and the first failure is returned. A coinbase passes here when well
/// formed; its amount is a block-level rule.
pub fn validate_transaction(tx: &Transaction, utxo: &UtxoSet) -> Result<Validated, TxError> {
    let out_total = check_format(tx)?;
    if tx.is_coinbase() {
        return Ok(Validated { fee: 0 });
    }

    let mut referenced = Vec::with_capacity(tx.inputs.len());
    for input in &tx.inputs {
        let op = input.outpoint();
        let entry = utxo.get(&op).ok_or(TxError::UnknownInput(op))?;
        if entry.locked {
            return Err(TxError::LockedInput(op));
        }
        referenced.push(entry);
    }

    let message = tx.tx_id();
    for (i, input) in tx.inputs.iter().enumerate() {
        if !verify(&input.public_key, &message.0, &input.signature) {
            return Err(TxError::BadSignature(i));
        }
    }

    for (i, (input, entry)) in tx.inputs.iter().zip(&referenced).enumerate() {
        if derive_address(&input.public_key, USER_ADDRESS_VERSION) != entry.output.recipient {
            return Err(TxError::WrongOwner(i));
        }
    }

    let in_total = referenced
        .iter()
        .try_fold(0u64, |acc, e| acc.checked_add(e.output.amount))
        .ok_or(TxError::Malformed("input sum overflows"))?;
    if out_total > in_total {
        return Err(TxError::ValueCreated {
            inputs: in_total,
            outputs: out_total,
        });
    }

    let mut seen = std::collections::BTreeSet::new();
    for input in &tx.inputs {
        if !seen.insert(input.outpoint()) {
            return Err(TxError::DuplicateInput(input.outpoint()));
        }
    }

    Ok(Validated {
        fee: in_total - out_total,
    })
}

/// Whether output `index` of `tx` is created locked. Only the first output of
/// a stake transaction is the stake; later outputs are ordinary change.
pub fn output_is_locked(tx: &Transaction, index: usize) -> bool {
    tx.kind == TxKind::Stake && index == 0
}

/// Validate and apply one transaction. On error `utxo` is unchanged.
pub fn apply_tx(tx: &Transaction, height: u64, utxo: &mut UtxoSet) -> Result<(Validated, TxUndo), TxError> {
    let validated = validate_transaction(tx, utxo)?;
    let id = tx.tx_id();
    for i in 0..tx.outputs.len() {
        let op = OutPoint::new(id, i as u32);
        if utxo.contains(&op) {
            return Err(TxError::OutputExists(op));
        }
    }
    let mut undo = TxUndo::default();
    for input in &tx.inputs {
        let op = input.outpoint();
        let entry = utxo.entries.remove(&op).expect("validated input exists");
        undo.spent.push((op, entry));
    }
    for (i, out) in tx.outputs.iter().enumerate() {
        let entry = UtxoEntry {
            output: out.clone(),
            locked: output_is_locked(tx, i),
            created_height: height,
        };
        utxo.insert_new(OutPoint::new(id, i as u32), entry)
            .expect("checked vacant above");
    }
    Ok((validated, undo))
}

/// Exact inverse of [`apply_tx`].
pub fn revert_tx(tx: &Transaction, undo: &TxUndo, utxo: &mut UtxoSet) {
    let id = tx.tx_id();
    for i in 0..tx.outputs.len() {
        let removed = utxo.entries.remove(&OutPoint::new(id, i as u32));
        debug_assert!(removed.is_some(), "reverting an output that is not present");
    }
    for (op, entry) in undo.spent.iter().rev() {
        let prior = utxo.entries.insert(*op, entry.clone());
        debug_assert!(prior.is_none(), "restoring an outpoint that is present");
    }
}

/// Error from applying a batch: which transaction failed and why.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transaction {index} invalid: {error}")]
pub struct BatchError {
    pub index: usize,
    pub error: TxError,
}

/// Apply a block's transactions in order, atomically. Returns per-transaction
/// undo records and the total fee of the non-coinbase transactions.
pub fn apply_transactions(
    txs: &[Transaction],
    height: u64,
    utxo: &mut UtxoSet,
) -> Result<(Vec<TxUndo>, u64), BatchError> {
    let mut undos = Vec::with_capacity(txs.len());
    let mut fees = 0u64;
    for (index, tx) in txs.iter().enumerate() {
        match apply_tx(tx, height, utxo) {
            Ok((v, undo)) => {
                fees = fees.saturating_add(v.fee);
                undos.push(undo);
            }
            Err(error) => {
                revert_transactions(&txs[..index], &undos, utxo);
                return Err(BatchError { index, error });
            }
        }
    }
    Ok((undos, fees))
}

/// Undo [`apply_transactions`] (last transaction first).
pub fn revert_transactions(txs: &[Transaction], undos: &[TxUndo], utxo: &mut UtxoSet) {
    assert_eq!(txs.len(), undos.len(), "undo records do not match transactions");
    for (tx, undo) in txs.iter().zip(undos).rev() {
        revert_tx(tx, undo, utxo);
    }
}

pub fn balance(address: &Address, utxo: &UtxoSet) -> Balance {
    utxo.owned_by(address).fold(Balance::default(), |mut b, (_, e)| {
        if e.locked {
            b.locked_stake += e.output.amount;
        } else {
            b.unlocked += e.output.amount;
        }
        b
    })
}
