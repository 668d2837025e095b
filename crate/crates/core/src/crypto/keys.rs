//! Key pairs and digital signatures.
//!
//! One scheme is implemented: ECDSA over secp256k1 with RFC 6979 deterministic
//! nonces. The message is hashed with SHA-256 before signing, so any message
//! length is accepted. Public keys travel as 33-byte compressed SEC1 points,
//! signatures as 64-byte `r ‖ s` with low-S normalisation.

use std::fmt;

use k256::ecdsa::signature::{Signer as _, Verifier as _};
use k256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use thiserror::Error;

use super::address::{derive_address, Address};

pub const SEED_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 33;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("seed maps outside the {0:?} key space")]
    SeedOutOfRange(SignatureAlgorithm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignatureAlgorithm {
    #[default]
    EcdsaSecp256k1,
}

impl SignatureAlgorithm {
    pub fn keypair_from_seed(self, seed: &[u8; SEED_LEN]) -> Result<KeyPair, KeyError> {
        match self {
            SignatureAlgorithm::EcdsaSecp256k1 => {
                let signing = SigningKey::from_slice(seed)
                    .map_err(|_| KeyError::SeedOutOfRange(self))?;
                let public = PublicKey(
                    signing
                        .verifying_key()
                        .to_sec1_point(true)
                        .as_bytes()
                        .to_vec(),
                );
                Ok(KeyPair {
                    seed: *seed,
                    signing,
                    public,
                })
            }
        }
    }

    pub fn verify(self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        match self {
            SignatureAlgorithm::EcdsaSecp256k1 => {
                let Ok(vk) = VerifyingKey::from_sec1_bytes(&public_key.0) else {
                    return false;
                };
                let Ok(sig) = EcdsaSignature::from_slice(&signature.0) else {
                    return false;
                };
                vk.verify(message, &sig).is_ok()
            }
        }
    }
}

/// Encoded verification key. May be malformed when decoded from the wire;
/// verification rejects such keys rather than erroring.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0))
    }
}

/// A signing key together with its public key. The secret half is never
/// printed and has no serialisation other than [`KeyPair::seed`], which the
/// key store uses.
#[derive(Clone)]
pub struct KeyPair {
    seed: [u8; SEED_LEN],
    signing: SigningKey,
    public: PublicKey,
}

impl KeyPair {
    pub fn from_seed(seed: &[u8; SEED_LEN]) -> Result<Self, KeyError> {
        SignatureAlgorithm::default().keypair_from_seed(seed)
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn address(&self, version: u8) -> Address {
        derive_address(&self.public, version)
    }

    /// Deterministic: the same key and message always give the same bytes.
    pub fn sign(&self, message: &[u8]) -> Signature {
        let sig: EcdsaSignature = self.signing.sign(message);
        Signature(sig.to_bytes().to_vec())
    }

    pub fn seed(&self) -> &[u8; SEED_LEN] {
        &self.seed
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .field("private", &"<redacted>")
            .finish()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
    }
}

impl Eq for KeyPair {}

pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    SignatureAlgorithm::default().verify(public_key, message, signature)
}
