use std::collections::BTreeMap;

use thiserror::Error;

use super::bytecode::{Bytecode, BytecodeError};
use super::vm::{execute, ExecResult, Storage};
use crate::crypto::{
    derive_address, sha256_parts, Address, Digest32, ADDRESS_LEN, ADDRESS_PAYLOAD_LEN,
    CONTRACT_ADDRESS_VERSION, USER_ADDRESS_VERSION,
};
use crate::ledger::{Transaction, TxKind};

pub const GAS_PER_FEE_UNIT: u64 = 10;

pub fn derive_contract_address(creator: &Address, deploy_index: u32) -> Address {
    let h = sha256_parts(&[&creator.to_bytes(), &deploy_index.to_be_bytes()]);
    let mut payload = [0u8; ADDRESS_PAYLOAD_LEN];
    payload.copy_from_slice(&h.0[..ADDRESS_PAYLOAD_LEN]);
    Address::from_payload(CONTRACT_ADDRESS_VERSION, payload)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractAccount {
    pub address: Address,
    pub code: Bytecode,
    pub storage: Storage,
    pub creator: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("deploy payload is not valid bytecode: {0}")]
    BadBytecode(#[from] BytecodeError),
    #[error("no contract at {0}")]
    UnknownContract(Address),
    #[error("malformed call data")]
    BadCallData,
    #[error("contract transaction has no signer")]
    NoSigner,
    #[error("not a contract transaction")]
    WrongKind,
}

/// Call payload: `contract address (25 bytes) ‖ count:u32 ‖ count × word:u64`.
pub fn encode_call_payload(contract: &Address, input: &[u64]) -> Vec<u8> {
    let mut out = contract.to_bytes().to_vec();
    out.extend_from_slice(&(input.len() as u32).to_be_bytes());
    for w in input {
        out.extend_from_slice(&w.to_be_bytes());
    }
    out
}

pub fn decode_call_payload(payload: &[u8]) -> Result<(Address, Vec<u64>), ContractError> {
    if payload.len() < ADDRESS_LEN + 4 {
        return Err(ContractError::BadCallData);
    }
    let (a, rest) = payload.split_at(ADDRESS_LEN);
    let address = Address::from_bytes(a.try_into().unwrap()).map_err(|_| ContractError::BadCallData)?;
    let (n, words) = rest.split_at(4);
    let n = u32::from_be_bytes(n.try_into().unwrap()) as usize;
    if words.len() != n.checked_mul(8).ok_or(ContractError::BadCallData)? {
        return Err(ContractError::BadCallData);
    }
    let input = words
        .chunks_exact(8)
        .map(|c| u64::from_be_bytes(c.try_into().unwrap()))
        .collect();
    Ok((address, input))
}

fn signer(tx: &Transaction) -> Result<Address, ContractError> {
    tx.inputs
        .first()
        .map(|i| derive_address(&i.public_key, USER_ADDRESS_VERSION))
        .ok_or(ContractError::NoSigner)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContractUndo {
    Deployed { address: Address, creator: Address },
    /// Prior values of the keys a successful call wrote (`None` if absent).
    Called {
        tx_id: Digest32,
        address: Address,
        prior: Vec<(u64, Option<u64>)>,
    },
}

/// Every deployed contract plus per-creator deploy counters and the result
/// of each call applied so far.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContractRegistry {
    accounts: BTreeMap<Address, ContractAccount>,
    deploy_counts: BTreeMap<Address, u32>,
    receipts: BTreeMap<Digest32, ExecResult>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, address: &Address) -> Option<&ContractAccount> {
        self.accounts.get(address)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &ContractAccount> {
        self.accounts.values()
    }

    pub fn receipt(&self, tx_id: &Digest32) -> Option<&ExecResult> {
        self.receipts.get(tx_id)
    }

    pub fn deploy_count(&self, creator: &Address) -> u32 {
        self.deploy_counts.get(creator).copied().unwrap_or(0)
    }

    /// Check a contract transaction without applying it.
    pub fn check(&self, tx: &Transaction) -> Result<(), ContractError> {
        match tx.kind {
            TxKind::ContractDeploy => {
                Bytecode::parse(&tx.payload)?;
                signer(tx)?;
            }
            TxKind::ContractCall => {
                let (address, _) = decode_call_payload(&tx.payload)?;
                if !self.accounts.contains_key(&address) {
                    return Err(ContractError::UnknownContract(address));
                }
            }
            _ => return Err(ContractError::WrongKind),
        }
        Ok(())
    }

    pub fn deploy(&mut self, tx: &Transaction) -> Result<(Address, ContractUndo), ContractError> {
        if tx.kind != TxKind::ContractDeploy {
            return Err(ContractError::WrongKind);
        }
        let code = Bytecode::parse(&tx.payload)?;
        let creator = signer(tx)?;
        let index = self.deploy_count(&creator);
        let address = derive_contract_address(&creator, index);
        self.deploy_counts.insert(creator, index + 1);
        self.accounts.insert(
            address,
            ContractAccount {
                address,
                code,
                storage: Storage::new(),
                creator,
            },
        );
        Ok((address, ContractUndo::Deployed { address, creator }))
    }

    /// Execute a call with gas bought by `fee`. Storage changes only on `Ok`;
    /// the fee is spent either way.
    pub fn call(&mut self, tx: &Transaction, fee: u64) -> Result<(ExecResult, ContractUndo), ContractError> {
        if tx.kind != TxKind::ContractCall {
            return Err(ContractError::WrongKind);
        }
        let (address, input) = decode_call_payload(&tx.payload)?;
        let account = self
            .accounts
            .get_mut(&address)
            .ok_or(ContractError::UnknownContract(address))?;
        let gas_limit = fee.saturating_mul(GAS_PER_FEE_UNIT);
        let result = execute(&account.code, &input, &account.storage, gas_limit);
        let mut prior = Vec::new();
        if result.status.is_ok() {
            for (&k, &v) in &result.storage_writes {
                prior.push((k, account.storage.insert(k, v)));
            }
        }
        let tx_id = tx.tx_id();
        self.receipts.insert(tx_id, result.clone());
        Ok((result, ContractUndo::Called { tx_id, address, prior }))
    }

    pub fn revert(&mut self, undo: &ContractUndo) {
        match undo {
            ContractUndo::Deployed { address, creator } => {
                self.accounts.remove(address);
                match self.deploy_counts.get(creator).copied() {
                    Some(1) | None => {
                        self.deploy_counts.remove(creator);
                    }
                    Some(n) => {
                        self.deploy_counts.insert(*creator, n - 1);
                    }
                }
            }
            ContractUndo::Called { tx_id, address, prior } => {
                self.receipts.remove(tx_id);
                if let Some(acc) = self.accounts.get_mut(address) {
                    for (k, old) in prior.iter().rev() {
                        match old {
                            Some(v) => acc.storage.insert(*k, *v),
                            None => acc.storage.remove(k),
                        };
                    }
                }
            }
        }
    }
}
