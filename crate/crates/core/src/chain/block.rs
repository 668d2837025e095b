use crate::codec::{put_bytes, put_count, put_u16, put_u64, DecodeError, Reader};
use crate::crypto::{merkle_root, sha256, Digest32, MerkleProof, MerkleTree};
use crate::ledger::Transaction;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest32,
    /// Merkle root over the transaction ids.
    pub data_hash: Digest32,
    pub timestamp: u64,
    /// Byte length of the encoded block data.
    pub size: u64,
    pub nonce: u64,
    pub rule_version: u16,
    pub consensus_tag: Vec<u8>,
}

/// Fixed part of an encoded header, before the tag bytes.
pub const HEADER_FIXED_LEN: usize = 8 + 32 + 32 + 8 + 8 + 8 + 2 + 4;

impl BlockHeader {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_FIXED_LEN + self.consensus_tag.len());
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        put_u64(out, self.height);
        out.extend_from_slice(&self.prev_hash.0);
        out.extend_from_slice(&self.data_hash.0);
        put_u64(out, self.timestamp);
        put_u64(out, self.size);
        put_u64(out, self.nonce);
        put_u16(out, self.rule_version);
        put_bytes(out, &self.consensus_tag);
    }

    pub fn hash(&self) -> Digest32 {
        sha256(&self.encode())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut rd = Reader::new(bytes);
        let h = Self::read(&mut rd)?;
        rd.finish()?;
        Ok(h)
    }

    pub(crate) fn read(rd: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            height: rd.u64()?,
            prev_hash: Digest32(rd.array()?),
            data_hash: Digest32(rd.array()?),
            timestamp: rd.u64()?,
            size: rd.u64()?,
            nonce: rd.u64()?,
            rule_version: rd.u16()?,
            consensus_tag: rd.bytes()?.to_vec(),
        })
    }
}

pub fn header_hash(header: &BlockHeader) -> Digest32 {
    header.hash()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

/// Encoded block data: transaction count then each transaction.
pub fn encode_block_data(txs: &[Transaction]) -> Vec<u8> {
    let mut out = Vec::new();
    put_count(&mut out, txs.len());
    for tx in txs {
        out.extend_from_slice(&tx.encode());
    }
    out
}

pub fn block_data_len(txs: &[Transaction]) -> u64 {
    4 + txs.iter().map(|t| t.encoded_len() as u64).sum::<u64>()
}

/// Merkle root of the ids. An empty list, which no valid block has, maps to
/// the zero digest.
pub fn compute_data_hash(txs: &[Transaction]) -> Digest32 {
    let ids: Vec<Digest32> = txs.iter().map(Transaction::tx_id).collect();
    merkle_root(ids.iter().map(|d| d.0)).unwrap_or(Digest32::ZERO)
}

impl Block {
    /// Assemble a block and fill in `data_hash` and `size` from the
    /// transactions.
    pub fn assemble(mut header: BlockHeader, transactions: Vec<Transaction>) -> Self {
        header.data_hash = compute_data_hash(&transactions);
        header.size = block_data_len(&transactions);
        Self { header, transactions }
    }

    pub fn hash(&self) -> Digest32 {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.header.encode();
        out.extend_from_slice(&encode_block_data(&self.transactions));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut rd = Reader::new(bytes);
        let header = BlockHeader::read(&mut rd)?;
        let n = rd.count(1 + 4 + 4 + 4)?;
        let mut transactions = Vec::with_capacity(n);
        for _ in 0..n {
            transactions.push(Transaction::read(&mut rd)?);
        }
        rd.finish()?;
        Ok(Self { header, transactions })
    }

    /// Inclusion proof for the transaction at `index`.
    pub fn tx_proof(&self, index: usize) -> Option<MerkleProof> {
        let ids: Vec<Digest32> = self.transactions.iter().map(Transaction::tx_id).collect();
        MerkleTree::new(ids.iter().map(|d| d.0)).ok()?.proof(index).ok()
    }
}
