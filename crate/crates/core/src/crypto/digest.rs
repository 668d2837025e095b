use std::fmt;
use std::str::FromStr;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;

/// A 256-bit hash value. Displays as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest32(pub [u8; DIGEST_LEN]);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HexError {
    #[error("expected {expected} hex characters, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid hex: {0}")]
    Invalid(#[from] hex::FromHexError),
}

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() != DIGEST_LEN * 2 {
            return Err(HexError::Length {
                expected: DIGEST_LEN * 2,
                got: s.len(),
            });
        }
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest32(out))
    }

    /// Number of leading `0` hex digits in the display form.
    pub fn leading_zero_nibbles(&self) -> u32 {
        let mut n = 0;
        for b in self.0 {
            if b == 0 {
                n += 2;
                continue;
            }
            if b < 0x10 {
                n += 1;
            }
            break;
        }
        n
    }

    /// First 4 bytes, used for checksums and compact display.
    pub fn prefix4(&self) -> [u8; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", &self.to_hex()[..16])
    }
}

impl FromStr for Digest32 {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

/// Hash functions the ledger can be parameterised over. Only SHA-256 is
/// implemented; the enum exists so headers and addresses name their algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HashAlgorithm {
    #[default]
    Sha256,
}

impl HashAlgorithm {
    pub fn digest(self, data: &[u8]) -> Digest32 {
        self.digest_parts(&[data])
    }

    pub fn digest_parts(self, parts: &[&[u8]]) -> Digest32 {
        match self {
            HashAlgorithm::Sha256 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                Digest32(h.finalize().into())
            }
        }
    }
}

pub fn sha256(data: &[u8]) -> Digest32 {
    HashAlgorithm::Sha256.digest(data)
}

/// SHA-256 over the concatenation of `parts`.
pub fn sha256_parts(parts: &[&[u8]]) -> Digest32 {
    HashAlgorithm::Sha256.digest_parts(parts)
}
