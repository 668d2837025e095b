//! A small but complete blockchain engine: hash-chained blocks over a signed
//! UTXO ledger, six pluggable publisher-selection models, longest-chain fork
//! choice with reorganisation, a gas-metered contract VM, and a seeded
//! discrete-event network simulator.

pub mod chain;
pub mod codec;
pub mod consensus;
pub mod contracts;
pub mod crypto;
pub mod fsutil;
pub mod ledger;
pub mod netsim;

pub use codec::DecodeError;
