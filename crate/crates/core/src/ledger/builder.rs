use thiserror::Error;

use super::tx::{OutPoint, Transaction, TxInput, TxKind, TxOutput};
use super::utxo::UtxoSet;
use crate::crypto::{Address, KeyPair, Signature, USER_ADDRESS_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("nothing to spend")]
    NoInputs,
    #[error("outpoint {0:?} is not spendable")]
    Unspendable(OutPoint),
    #[error("no supplied key owns {0:?}")]
    NoKey(OutPoint),
    #[error("inputs hold {available}, outputs and fee need {required}")]
    InsufficientFunds { available: u64, required: u64 },
    #[error("amount overflow")]
    Overflow,
}

/// Everything needed to assemble and sign a transaction.
#[derive(Debug, Clone)]
pub struct TxRequest<'a> {
    pub kind: TxKind,
    pub spend: Vec<OutPoint>,
    pub pay: Vec<(Address, u64)>,
    pub fee: u64,
    pub payload: Vec<u8>,
    pub keys: &'a [KeyPair],
}

impl<'a> TxRequest<'a> {
    pub fn transfer(spend: Vec<OutPoint>, pay: Vec<(Address, u64)>, fee: u64, keys: &'a [KeyPair]) -> Self {
        Self {
            kind: TxKind::Transfer,
            spend,
            pay,
            fee,
            payload: Vec::new(),
            keys,
        }
    }
}

/// Build and sign `req`. Any surplus beyond outputs and fee is returned as
/// change to the owner of the first spent output.
pub fn build(req: &TxRequest<'_>, utxo: &UtxoSet) -> Result<Transaction, BuildError> {
    if req.spend.is_empty() {
        return Err(BuildError::NoInputs);
    }
    let mut available = 0u64;
    let mut signers = Vec::with_capacity(req.spend.len());
    let mut change_to = None;
    for op in &req.spend {
        let entry = utxo
            .get(op)
            .filter(|e| !e.locked)
            .ok_or(BuildError::Unspendable(*op))?;
        let key = req
            .keys
            .iter()
            .find(|k| k.address(USER_ADDRESS_VERSION) == entry.output.recipient)
            .ok_or(BuildError::NoKey(*op))?;
        available = available
            .checked_add(entry.output.amount)
            .ok_or(BuildError::Overflow)?;
        change_to.get_or_insert(entry.output.recipient);
        signers.push(key);
    }
    let required = req
        .pay
        .iter()
        .try_fold(req.fee, |acc, (_, a)| acc.checked_add(*a))
        .ok_or(BuildError::Overflow)?;
    if required > available {
        return Err(BuildError::InsufficientFunds { available, required });
    }

    let mut outputs: Vec<TxOutput> = req
        .pay
        .iter()
        .map(|(recipient, amount)| TxOutput {
            amount: *amount,
            recipient: *recipient,
        })
        .collect();
    if available > required {
        outputs.push(TxOutput {
            amount: available - required,
            recipient: change_to.expect("at least one input"),
        });
    }

    let mut tx = Transaction {
        kind: req.kind,
        inputs: req
            .spend
            .iter()
            .zip(&signers)
            .map(|(op, k)| TxInput {
                source_tx: op.tx_id,
                source_index: op.index,
                public_key: k.public_key().clone(),
                signature: Signature(Vec::new()),
            })
            .collect(),
        outputs,
        payload: req.payload.clone(),
    };
    let id = tx.tx_id();
    for (input, key) in tx.inputs.iter_mut().zip(&signers) {
        input.signature = key.sign(&id.0);
    }
    Ok(tx)
}

/// Convenience wrapper for a plain transfer.
pub fn build_transaction(
    spend: &[OutPoint],
    pay: &[(Address, u64)],
    fee: u64,
    keys: &[KeyPair],
    utxo: &UtxoSet,
) -> Result<Transaction, BuildError> {
    build(&TxRequest::transfer(spend.to_vec(), pay.to_vec(), fee, keys), utxo)
}

/// Lock `amount` from `spend` as stake owned by the first input's owner.
pub fn build_stake(
    spend: &[OutPoint],
    amount: u64,
    fee: u64,
    keys: &[KeyPair],
    utxo: &UtxoSet,
) -> Result<Transaction, BuildError> {
    let owner = spend
        .first()
        .and_then(|op| utxo.get(op))
        .map(|e| e.output.recipient)
        .ok_or(BuildError::NoInputs)?;
    build(
        &TxRequest {
            kind: TxKind::Stake,
            spend: spend.to_vec(),
            pay: vec![(owner, amount)],
            fee,
            payload: Vec::new(),
            keys,
        },
        utxo,
    )
}

/// Unlocked outpoints owned by `address`, oldest outpoint order, until
/// `target` is covered. `None` if the balance is short.
pub fn select_coins(address: &Address, target: u64, utxo: &UtxoSet) -> Option<Vec<OutPoint>> {
    let mut got = 0u64;
    let mut picked = Vec::new();
    for (op, e) in utxo.owned_by(address) {
        if e.locked {
            continue;
        }
        if got >= target && !picked.is_empty() {
            break;
        }
        got = got.saturating_add(e.output.amount);
        picked.push(*op);
    }
    (got >= target && !picked.is_empty()).then_some(picked)
}
