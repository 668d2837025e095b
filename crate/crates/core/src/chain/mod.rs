//! Blocks, per-node acceptance rules, fork choice and persistence.

pub mod block;
pub mod params;
pub mod persist;
pub mod produce;
pub mod rules;
pub mod state;
pub mod store;
pub mod validate;
pub mod verify;

pub use block::{block_data_len, HEADER_FIXED_LEN, compute_data_hash, encode_block_data, header_hash, Block, BlockHeader};
pub use params::{make_genesis, Allocation, ChainParams, GenesisError};
pub use produce::{seal_pow, seal_signed, PublishTicket, SLOT_SEARCH_LIMIT};
pub use persist::{
    decode_chain_file, encode_chain_file, read_chain_file, split_chain_records, PersistError, RawRecord, CHAIN_FORMAT_VERSION,
    CHAIN_MAGIC,
};
pub use rules::{ForkKind, NodeFork, ValidationRules};
pub use state::{BlockUndo, ChainState};
pub use store::{AppendOutcome, BlockStatus, ChainStore, CheckpointError, Reorg};
pub use validate::{check_structure, BlockError};
pub use verify::{longest_chain, verify_blocks, verify_chain, verify_encoded_blocks, VerifyError, VerifyReport};
