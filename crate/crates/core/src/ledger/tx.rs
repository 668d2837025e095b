use std::fmt;

use crate::codec::{put_bytes, put_count, put_u32, put_u64, DecodeError, Reader};
use crate::crypto::{sha256, Address, Digest32, PublicKey, Signature, ADDRESS_LEN};

/// Smallest-unit cap on any single amount and on a transaction's output sum.
pub const MAX_SUPPLY: u64 = 21_000_000 * 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum TxKind {
    Transfer = 0,
    Coinbase = 1,
    Stake = 2,
    ContractDeploy = 3,
    ContractCall = 4,
}

impl TxKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => TxKind::Transfer,
            1 => TxKind::Coinbase,
            2 => TxKind::Stake,
            3 => TxKind::ContractDeploy,
            4 => TxKind::ContractCall,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TxKind::Transfer => "transfer",
            TxKind::Coinbase => "coinbase",
            TxKind::Stake => "stake",
            TxKind::ContractDeploy => "deploy",
            TxKind::ContractCall => "call",
        }
    }
}

/// Reference to one output of an earlier transaction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPoint {
    pub tx_id: Digest32,
    pub index: u32,
}

impl OutPoint {
    pub fn new(tx_id: Digest32, index: u32) -> Self {
        Self { tx_id, index }
    }
}

impl fmt::Debug for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", &self.tx_id.to_hex()[..12], self.index)
    }
}

impl fmt::Display for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tx_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutput {
    pub amount: u64,
    pub recipient: Address,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxInput {
    pub source_tx: Digest32,
    pub source_index: u32,
    pub public_key: PublicKey,
    pub signature: Signature,
}

impl TxInput {
    pub fn outpoint(&self) -> OutPoint {
        OutPoint::new(self.source_tx, self.source_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub kind: TxKind,
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    /// Contract code, call data, or the coinbase height; empty otherwise.
    pub payload: Vec<u8>,
}

const MIN_INPUT_LEN: usize = 32 + 4 + 4 + 4;
const OUTPUT_LEN: usize = 8 + ADDRESS_LEN;

impl Transaction {
    /// Reward transaction for the block at `height`. The height in the
    /// payload keeps coinbase ids unique across blocks.
    pub fn coinbase(height: u64, outputs: Vec<TxOutput>) -> Self {
        Self {
            kind: TxKind::Coinbase,
            inputs: Vec::new(),
            outputs,
            payload: height.to_be_bytes().to_vec(),
        }
    }

    pub fn is_coinbase(&self) -> bool {
        self.kind == TxKind::Coinbase
    }

    fn encode_into(&self, out: &mut Vec<u8>, zero_signatures: bool) {
        out.push(self.kind as u8);
        put_count(out, self.inputs.len());
        for i in &self.inputs {
            out.extend_from_slice(&i.source_tx.0);
            put_u32(out, i.source_index);
            put_bytes(out, i.public_key.as_bytes());
            if zero_signatures {
                put_bytes(out, &[]);
            } else {
                put_bytes(out, i.signature.as_bytes());
            }
        }
        put_count(out, self.outputs.len());
        for o in &self.outputs {
            put_u64(out, o.amount);
            out.extend_from_slice(&o.recipient.to_bytes());
        }
        put_bytes(out, &self.payload);
    }

    /// Canonical bytes, used for storage and block sizes.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out, false);
        out
    }

    pub fn encoded_len(&self) -> usize {
        1 + 4
            + self
                .inputs
                .iter()
                .map(|i| MIN_INPUT_LEN + i.public_key.as_bytes().len() + i.signature.as_bytes().len())
                .sum::<usize>()
            + 4
            + self.outputs.len() * OUTPUT_LEN
            + 4
            + self.payload.len()
    }

    /// Canonical bytes with every signature replaced by an empty one. This is
    /// what the id commits to and what every input signs.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out, true);
        out
    }

    pub fn tx_id(&self) -> Digest32 {
        sha256(&self.signing_bytes())
    }

    pub fn total_output(&self) -> Option<u64> {
        self.outputs
            .iter()
            .try_fold(0u64, |acc, o| acc.checked_add(o.amount))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut rd = Reader::new(bytes);
        let tx = Self::read(&mut rd)?;
        rd.finish()?;
        Ok(tx)
    }

    pub(crate) fn read(rd: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = rd.position();
        let kind = TxKind::from_byte(rd.u8()?).ok_or_else(|| rd.invalid("transaction kind", at))?;
        let n_in = rd.count(MIN_INPUT_LEN)?;
        let mut inputs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            let source_tx = Digest32(rd.array()?);
            let source_index = rd.u32()?;
            let public_key = PublicKey(rd.bytes()?.to_vec());
            let signature = Signature(rd.bytes()?.to_vec());
            inputs.push(TxInput {
                source_tx,
                source_index,
                public_key,
                signature,
            });
        }
        let n_out = rd.count(OUTPUT_LEN)?;
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let amount = rd.u64()?;
            let at = rd.position();
            let recipient = Address::from_bytes(&rd.array()?)
                .map_err(|_| rd.invalid("address checksum", at))?;
            outputs.push(TxOutput { amount, recipient });
        }
        let payload = rd.bytes()?.to_vec();
        Ok(Self {
            kind,
            inputs,
            outputs,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyPair;

    fn sample() -> Transaction {
        let kp = KeyPair::from_seed(&[3; 32]).unwrap();
        let to = kp.address(0);
        Transaction {
            kind: TxKind::Transfer,
            inputs: vec![TxInput {
                source_tx: sha256(b"prev"),
                source_index: 1,
                public_key: kp.public_key().clone(),
                signature: kp.sign(b"whatever"),
            }],
            outputs: vec![
                TxOutput { amount: 3, recipient: to },
                TxOutput { amount: 2, recipient: to },
            ],
            payload: vec![],
        }
    }

    #[test]
    fn layout_matches_wire_format() {
        let tx = sample();
        let bytes = tx.encode();
        assert_eq!(bytes.len(), tx.encoded_len());
        assert_eq!(bytes[0], TxKind::Transfer as u8);
        assert_eq!(&bytes[1..5], &1u32.to_be_bytes());
        assert_eq!(&bytes[5..37], &sha256(b"prev").0);
        assert_eq!(&bytes[37..41], &1u32.to_be_bytes());
        assert_eq!(&bytes[41..45], &33u32.to_be_bytes());
        // 1 + 4 + (32+4+4+33+4+64) + 4 + 2*33 + 4
        assert_eq!(bytes.len(), 1 + 4 + 141 + 4 + 66 + 4);
        assert_eq!(Transaction::decode(&bytes).unwrap(), tx);
    }

    #[test]
    fn id_ignores_signatures_but_not_outputs() {
        let tx = sample();
        let mut resigned = tx.clone();
        resigned.inputs[0].signature = Signature(vec![7; 64]);
        assert_eq!(tx.tx_id(), resigned.tx_id());
        let mut changed = tx.clone();
        changed.outputs[0].amount ^= 1;
        assert_ne!(tx.tx_id(), changed.tx_id());
    }

    #[test]
    fn decode_rejects_trailing_and_truncated() {
        let bytes = sample().encode();
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Transaction::decode(&long), Err(DecodeError::TrailingBytes { .. })));
        assert!(Transaction::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad_kind = bytes.clone();
        bad_kind[0] = 9;
        assert!(matches!(Transaction::decode(&bad_kind), Err(DecodeError::Invalid { .. })));
    }

    #[test]
    fn coinbase_ids_differ_by_height() {
        let a = Transaction::coinbase(1, vec![]);
        let b = Transaction::coinbase(2, vec![]);
        assert_ne!(a.tx_id(), b.tx_id());
    }
}
