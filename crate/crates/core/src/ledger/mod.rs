//! Transactions, the unspent-output set, and the pending pool.

mod builder;
mod mempool;
mod tx;
mod utxo;

pub use builder::{build, build_stake, build_transaction, select_coins, BuildError, TxRequest};
pub use mempool::{Mempool, MempoolError, PendingTx};
pub use tx::{OutPoint, Transaction, TxInput, TxKind, TxOutput, MAX_SUPPLY};
pub use utxo::{
    apply_transactions, apply_tx, balance, output_is_locked, revert_transactions, revert_tx,
    validate_transaction, Balance, BatchError, TxError, TxUndo, UtxoEntry, UtxoSet, Validated,
};
