//! Plaintext wallet file.
//!
//! Layout: `format_version:u8 ‖ count:u32 ‖ count × (seed:bytes ‖
//! address_version:u8 ‖ label:bytes)`, where `bytes` is a 4-byte big-endian
//! length followed by that many bytes. Labels are UTF-8.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::address::Address;
use super::keys::{KeyError, KeyPair, SEED_LEN};
use crate::codec::{put_bytes, put_count, DecodeError, Reader};

pub const KEYSTORE_FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum KeyStoreError {
    #[error("label {0:?} already exists")]
    DuplicateLabel(String),
    #[error("unsupported key store version {0}")]
    UnsupportedVersion(u8),
    #[error("corrupt key store: {0}")]
    Corrupt(#[from] DecodeError),
    #[error("stored seed is {0} bytes, expected {SEED_LEN}")]
    SeedLength(usize),
    #[error("label is not valid UTF-8")]
    Label,
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct KeyRecord {
    pub label: String,
    pub address_version: u8,
    pub key: KeyPair,
}

impl KeyRecord {
    pub fn address(&self) -> Address {
        self.key.address(self.address_version)
    }
}

#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    records: Vec<KeyRecord>,
}

impl KeyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[KeyRecord] {
        &self.records
    }

    pub fn insert(
        &mut self,
        label: &str,
        key: KeyPair,
        address_version: u8,
    ) -> Result<&KeyRecord, KeyStoreError> {
        if self.records.iter().any(|r| r.label == label) {
            return Err(KeyStoreError::DuplicateLabel(label.to_owned()));
        }
        self.records.push(KeyRecord {
            label: label.to_owned(),
            address_version,
            key,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn by_label(&self, label: &str) -> Option<&KeyRecord> {
        self.records.iter().find(|r| r.label == label)
    }

    pub fn by_address(&self, address: &Address) -> Option<&KeyRecord> {
        self.records.iter().find(|r| r.address() == *address)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![KEYSTORE_FORMAT_VERSION];
        put_count(&mut out, self.records.len());
        for r in &self.records {
            put_bytes(&mut out, r.key.seed());
            out.push(r.address_version);
            put_bytes(&mut out, r.label.as_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, KeyStoreError> {
        let mut rd = Reader::new(bytes);
        let version = rd.u8()?;
        if version != KEYSTORE_FORMAT_VERSION {
            return Err(KeyStoreError::UnsupportedVersion(version));
        }
        let n = rd.count(4 + 1 + 4)?;
        let mut store = KeyStore::new();
        for _ in 0..n {
            let seed = rd.bytes()?;
            let seed: [u8; SEED_LEN] = seed
                .try_into()
                .map_err(|_| KeyStoreError::SeedLength(seed.len()))?;
            let address_version = rd.u8()?;
            let label = std::str::from_utf8(rd.bytes()?).map_err(|_| KeyStoreError::Label)?;
            store.insert(label, KeyPair::from_seed(&seed)?, address_version)?;
        }
        rd.finish()?;
        Ok(store)
    }

    /// Missing file reads as an empty store.
    pub fn load(path: &Path) -> Result<Self, KeyStoreError> {
        match fs::read(path) {
            Ok(bytes) => Self::decode(&bytes),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), KeyStoreError> {
        crate::fsutil::write_atomic(path, &self.encode())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::USER_ADDRESS_VERSION;

    #[test]
    fn encode_decode_and_duplicates() {
        let mut ks = KeyStore::new();
        ks.insert("alice", KeyPair::from_seed(&[1; 32]).unwrap(), USER_ADDRESS_VERSION)
            .unwrap();
        ks.insert("bob", KeyPair::from_seed(&[2; 32]).unwrap(), USER_ADDRESS_VERSION)
            .unwrap();
        assert!(matches!(
            ks.insert("alice", KeyPair::from_seed(&[3; 32]).unwrap(), 0),
            Err(KeyStoreError::DuplicateLabel(_))
        ));
        let back = KeyStore::decode(&ks.encode()).unwrap();
        assert_eq!(back.records().len(), 2);
        assert_eq!(back.by_label("bob").unwrap().address(), ks.by_label("bob").unwrap().address());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut ks = KeyStore::new();
        ks.insert("a", KeyPair::from_seed(&[1; 32]).unwrap(), 0).unwrap();
        let bytes = ks.encode();
        assert!(matches!(
            KeyStore::decode(&bytes[..bytes.len() - 1]),
            Err(KeyStoreError::Corrupt(_))
        ));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("keys.bin");
        assert!(KeyStore::load(&path).unwrap().records().is_empty());
        let mut ks = KeyStore::new();
        ks.insert("a", KeyPair::from_seed(&[9; 32]).unwrap(), 0).unwrap();
        ks.save(&path).unwrap();
        assert_eq!(KeyStore::load(&path).unwrap().records().len(), 1);
    }
}
