use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::digest::sha256;
use super::keys::PublicKey;

pub const ADDRESS_PAYLOAD_LEN: usize = 20;
pub const ADDRESS_LEN: usize = 1 + ADDRESS_PAYLOAD_LEN + 4;

/// Version byte for addresses derived from a user's public key.
pub const USER_ADDRESS_VERSION: u8 = 0x00;
/// Version byte for contract accounts.
pub const CONTRACT_ADDRESS_VERSION: u8 = 0x05;

/// `version ‖ payload ‖ checksum`, displayed as 50 lowercase hex characters.
/// Ordering is lexicographic over those bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    version: u8,
    payload: [u8; ADDRESS_PAYLOAD_LEN],
    checksum: [u8; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("address must be 50 hex chars, got {0}")]
    Length(usize),
    #[error("address is not valid hex")]
    Hex,
    #[error("address checksum mismatch")]
    Checksum,
}

fn checksum(version: u8, payload: &[u8; ADDRESS_PAYLOAD_LEN]) -> [u8; 4] {
    let mut body = [0u8; 1 + ADDRESS_PAYLOAD_LEN];
    body[0] = version;
    body[1..].copy_from_slice(payload);
    sha256(&body).prefix4()
}

impl Address {
    pub fn from_payload(version: u8, payload: [u8; ADDRESS_PAYLOAD_LEN]) -> Self {
        Self {
            version,
            payload,
            checksum: checksum(version, &payload),
        }
    }

    pub fn version(&self) -> u8 {
        self.version
    }

    pub fn payload(&self) -> &[u8; ADDRESS_PAYLOAD_LEN] {
        &self.payload
    }

    pub fn to_bytes(&self) -> [u8; ADDRESS_LEN] {
        let mut out = [0u8; ADDRESS_LEN];
        out[0] = self.version;
        out[1..1 + ADDRESS_PAYLOAD_LEN].copy_from_slice(&self.payload);
        out[1 + ADDRESS_PAYLOAD_LEN..].copy_from_slice(&self.checksum);
        out
    }

    pub fn from_bytes(bytes: &[u8; ADDRESS_LEN]) -> Result<Self, AddressError> {
        let version = bytes[0];
        let mut payload = [0u8; ADDRESS_PAYLOAD_LEN];
        payload.copy_from_slice(&bytes[1..1 + ADDRESS_PAYLOAD_LEN]);
        let mut sum = [0u8; 4];
        sum.copy_from_slice(&bytes[1 + ADDRESS_PAYLOAD_LEN..]);
        if checksum(version, &payload) != sum {
            return Err(AddressError::Checksum);
        }
        Ok(Self {
            version,
            payload,
            checksum: sum,
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// First 8 hex chars of the payload, for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.payload[..4])
    }
}

/// `payload = sha256(public_key)[..20]`.
pub fn derive_address(public_key: &PublicKey, version: u8) -> Address {
    let h = sha256(public_key.as_bytes());
    let mut payload = [0u8; ADDRESS_PAYLOAD_LEN];
    payload.copy_from_slice(&h.0[..ADDRESS_PAYLOAD_LEN]);
    Address::from_payload(version, payload)
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

impl FromStr for Address {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() != ADDRESS_LEN * 2 {
            return Err(AddressError::Length(s.len()));
        }
        let mut bytes = [0u8; ADDRESS_LEN];
        hex::decode_to_slice(s, &mut bytes).map_err(|_| AddressError::Hex)?;
        Address::from_bytes(&bytes)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
