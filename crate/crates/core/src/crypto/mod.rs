//! Hashing, the nonce puzzle, keys and signatures, addresses, Merkle trees.

mod address;
mod digest;
mod keys;
pub mod keystore;
pub mod merkle;
pub mod puzzle;
mod stream;

pub use address::{
    derive_address, Address, AddressError, ADDRESS_LEN, ADDRESS_PAYLOAD_LEN,
    CONTRACT_ADDRESS_VERSION, USER_ADDRESS_VERSION,
};
pub use digest::{sha256, sha256_parts, Digest32, HashAlgorithm, HexError, DIGEST_LEN};
pub use keys::{
    verify, KeyError, KeyPair, PublicKey, Signature, SignatureAlgorithm, PUBLIC_KEY_LEN, SEED_LEN,
    SIGNATURE_LEN,
};
pub use merkle::{merkle_proof, merkle_root, verify_proof, MerkleError, MerkleProof, MerkleTree};
pub use puzzle::{solve_string_puzzle, solve_string_puzzle_pooled, PuzzleError, PuzzleSolution};
pub use stream::{exponential_from_unit, unit_from_u64, HashStream};
