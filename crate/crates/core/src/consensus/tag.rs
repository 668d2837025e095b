//! Header `consensus_tag` layout.
//!
//! PoW: `model ‖ target (32 bytes)`. Every other model:
//! `model ‖ bytes(public key) ‖ bytes(extra) ‖ bytes(signature)`, where the
//! signature covers the header hash computed with an empty signature field.

use crate::chain::BlockHeader;
use crate::codec::{put_bytes, DecodeError, Reader};
use crate::crypto::{derive_address, verify, Address, KeyPair, PublicKey, Signature, USER_ADDRESS_VERSION};

use super::params::{Model, Target};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusTag {
    Pow {
        target: Target,
    },
    Signed {
        model: Model,
        public_key: PublicKey,
        extra: Vec<u8>,
        signature: Signature,
    },
}

impl ConsensusTag {
    pub fn model(&self) -> Model {
        match self {
            ConsensusTag::Pow { .. } => Model::Pow,
            ConsensusTag::Signed { model, .. } => *model,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.model() as u8];
        match self {
            ConsensusTag::Pow { target } => out.extend_from_slice(&target.0),
            ConsensusTag::Signed {
                public_key,
                extra,
                signature,
                ..
            } => {
                put_bytes(&mut out, public_key.as_bytes());
                put_bytes(&mut out, extra);
                put_bytes(&mut out, signature.as_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut rd = Reader::new(bytes);
        let model = Model::from_byte(rd.u8()?).ok_or_else(|| rd.invalid("consensus model", 0))?;
        let tag = match model {
            Model::Pow => ConsensusTag::Pow {
                target: Target(rd.array()?),
            },
            _ => ConsensusTag::Signed {
                model,
                public_key: PublicKey(rd.bytes()?.to_vec()),
                extra: rd.bytes()?.to_vec(),
                signature: Signature(rd.bytes()?.to_vec()),
            },
        };
        rd.finish()?;
        Ok(tag)
    }

    /// Publisher address for signed tags.
    pub fn publisher(&self) -> Option<Address> {
        match self {
            ConsensusTag::Signed { public_key, .. } => {
                Some(derive_address(public_key, USER_ADDRESS_VERSION))
            }
            ConsensusTag::Pow { .. } => None,
        }
    }
}

fn unsigned_copy(header: &BlockHeader, model: Model, public_key: &PublicKey, extra: &[u8]) -> BlockHeader {
    let mut h = header.clone();
    h.consensus_tag = ConsensusTag::Signed {
        model,
        public_key: public_key.clone(),
        extra: extra.to_vec(),
        signature: Signature(Vec::new()),
    }
    .encode();
    h
}

/// Stamp a signed tag onto `header`. All other header fields must be final.
pub fn sign_header(header: &mut BlockHeader, model: Model, key: &KeyPair, extra: Vec<u8>) {
    let msg = unsigned_copy(header, model, key.public_key(), &extra).hash();
    header.consensus_tag = ConsensusTag::Signed {
        model,
        public_key: key.public_key().clone(),
        extra,
        signature: key.sign(&msg.0),
    }
    .encode();
}

/// Check the signature of a signed tag against its own public key.
pub fn verify_header_signature(header: &BlockHeader, tag: &ConsensusTag) -> bool {
    match tag {
        ConsensusTag::Signed {
            model,
            public_key,
            extra,
            signature,
        } => {
            let msg = unsigned_copy(header, *model, public_key, extra).hash();
            verify(public_key, &msg.0, signature)
        }
        ConsensusTag::Pow { .. } => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Digest32;

    fn header() -> BlockHeader {
        BlockHeader {
            height: 1,
            prev_hash: Digest32::ZERO,
            data_hash: Digest32::ZERO,
            timestamp: 10,
            size: 4,
            nonce: 0,
            rule_version: 1,
            consensus_tag: Vec::new(),
        }
    }

    #[test]
    fn signed_round_trip_and_tamper() {
        let key = KeyPair::from_seed(&[4; 32]).unwrap();
        let mut h = header();
        sign_header(&mut h, Model::Poa, &key, vec![1, 2]);
        let tag = ConsensusTag::decode(&h.consensus_tag).unwrap();
        assert_eq!(tag.publisher(), Some(key.address(0)));
        assert!(verify_header_signature(&h, &tag));
        let mut t = h.clone();
        t.timestamp += 1;
        assert!(!verify_header_signature(&t, &tag));
    }

    #[test]
    fn pow_tag_round_trip() {
        let tag = ConsensusTag::Pow { target: Target::from_bits(8) };
        assert_eq!(ConsensusTag::decode(&tag.encode()).unwrap(), tag);
        assert!(ConsensusTag::decode(&[0, 1, 2]).is_err());
        assert!(ConsensusTag::decode(&[77]).is_err());
    }
}
