//! Chain file: `"LGLB" ‖ version:u16 ‖ records`, each record
//! `len:u32 ‖ encoded block ‖ sha256(block)[..4]`, in acceptance order with
//! genesis first.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::block::Block;
use super::params::ChainParams;
use super::rules::ValidationRules;
use super::store::{AppendOutcome, BlockStatus, ChainStore};
use super::validate::BlockError;
use crate::crypto::sha256;
use crate::fsutil::write_atomic;

pub const CHAIN_MAGIC: &[u8; 4] = b"LGLB";
pub const CHAIN_FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a chain file")]
    BadMagic,
    #[error("unsupported chain file version {0}")]
    Version(u16),
    #[error("file ends inside record {record} at offset {offset}")]
    Truncated { record: usize, offset: usize },
    #[error("checksum mismatch in record {record} at offset {offset}")]
    Checksum { record: usize, offset: usize },
    #[error("record {record} does not decode: {source}")]
    Decode {
        record: usize,
        source: crate::codec::DecodeError,
    },
    #[error("file holds no blocks")]
    Empty,
    #[error("first record is not this chain's genesis")]
    Genesis,
    #[error("record {record} (height {height}) rejected: {error}")]
    Rejected {
        record: usize,
        height: u64,
        error: BlockError,
    },
    #[error("genesis: {0}")]
    Params(#[from] super::params::GenesisError),
}

impl PersistError {
    /// Damage to the file itself, as opposed to a well-formed file holding
    /// blocks that fail validation.
    pub fn is_corruption(&self) -> bool {
        !matches!(self, PersistError::Rejected { .. } | PersistError::Genesis)
    }
}

fn checksum(block_bytes: &[u8]) -> [u8; 4] {
    sha256(block_bytes).prefix4()
}

pub fn encode_chain_file<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> Vec<u8> {
    let mut out = CHAIN_MAGIC.to_vec();
    out.extend_from_slice(&CHAIN_FORMAT_VERSION.to_be_bytes());
    for b in blocks {
        let bytes = b.encode();
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&bytes);
        out.extend_from_slice(&checksum(&bytes));
    }
    out
}

/// One framed record, before its checksum is enforced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub offset: usize,
    pub body: Vec<u8>,
    pub checksum_ok: bool,
}

/// Split the file into records without judging their checksums. Only the
/// header and record framing can fail here.
pub fn split_chain_records(bytes: &[u8]) -> Result<Vec<RawRecord>, PersistError> {
    if bytes.len() < 6 || &bytes[..4] != CHAIN_MAGIC {
        return Err(PersistError::BadMagic);
    }
    let version = u16::from_be_bytes([bytes[4], bytes[5]]);
    if version != CHAIN_FORMAT_VERSION {
        return Err(PersistError::Version(version));
    }
    let mut pos = 6;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let truncated = PersistError::Truncated {
            record: out.len(),
            offset: pos,
        };
        let Some(len_bytes) = bytes.get(pos..pos + 4) else {
            return Err(truncated);
        };
        let len = u32::from_be_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        let body_start = pos + 4;
        let (Some(body), Some(sum)) = (
            bytes.get(body_start..body_start + len),
            bytes.get(body_start + len..body_start + len + 4),
        ) else {
            return Err(truncated);
        };
        out.push(RawRecord {
            offset: pos,
            body: body.to_vec(),
            checksum_ok: sum == checksum(body),
        });
        pos = body_start + len + 4;
    }
    Ok(out)
}

/// Split and checksum every record. Does not validate the blocks.
pub fn decode_chain_file(bytes: &[u8]) -> Result<Vec<Block>, PersistError> {
    split_chain_records(bytes)?
        .into_iter()
        .enumerate()
        .map(|(record, r)| {
            if !r.checksum_ok {
                return Err(PersistError::Checksum {
                    record,
                    offset: r.offset,
                });
            }
            Block::decode(&r.body).map_err(|source| PersistError::Decode { record, source })
        })
        .collect()
}

pub fn read_chain_file(path: &Path) -> Result<Vec<Block>, PersistError> {
    decode_chain_file(&fs::read(path)?)
}

impl ChainStore {
    /// Every stored block that has not been rejected, in acceptance order.
    pub fn encode_file(&self) -> Vec<u8> {
        encode_chain_file(
            self.blocks_in_order()
                .filter(|b| !matches!(self.status(&b.hash()), Some(BlockStatus::Invalid(_)))),
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        write_atomic(path, &self.encode_file())?;
        Ok(())
    }

    /// Rebuild a store by replaying a chain file through full validation.
    pub fn from_file_bytes(bytes: &[u8], params: ChainParams, rules: ValidationRules) -> Result<Self, PersistError> {
        let blocks = decode_chain_file(bytes)?;
        let mut store = ChainStore::new(params, rules)?;
        let mut it = blocks.into_iter().enumerate();
        match it.next() {
            None => return Err(PersistError::Empty),
            Some((_, g)) if g == *store.genesis() => {}
            Some(_) => return Err(PersistError::Genesis),
        }
        for (record, b) in it {
            let height = b.header.height;
            if let AppendOutcome::Rejected(error) = store.append_block(b) {
                return Err(PersistError::Rejected { record, height, error });
            }
        }
        Ok(store)
    }

    pub fn load(path: &Path, params: ChainParams, rules: ValidationRules) -> Result<Self, PersistError> {
        Self::from_file_bytes(&fs::read(path)?, params, rules)
    }
}
