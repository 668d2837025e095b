//! The single-node chain kept under `--data-dir`: `keys.dat`, `chain.toml`
//! and `chain.dat`. Blocks are mined on demand at the chain's own target.

use std::path::{Path, PathBuf};

use blocklab::chain::{seal_pow, Allocation, AppendOutcome, ChainParams, ChainStore, ValidationRules};
use blocklab::consensus::{ConsensusParams, PowParams, Target};
use blocklab::contracts::{derive_contract_address, encode_call_payload, Bytecode, ExecStatus};
use blocklab::crypto::keystore::KeyStore;
use blocklab::crypto::{Address, KeyPair, USER_ADDRESS_VERSION};
use blocklab::ledger::{build, select_coins, Transaction, TxKind, TxRequest};

use crate::{Fail, EXIT_CONFIG, EXIT_IO, EXIT_NOT_FOUND};

/// Leading zero bits of the default local target.
pub const LOCAL_POW_BITS: u32 = 8;

pub fn keys_path(data: &Path) -> PathBuf {
    data.join("keys.dat")
}

pub fn params_path(data: &Path) -> PathBuf {
    data.join("chain.toml")
}

pub fn chain_path(data: &Path) -> PathBuf {
    data.join("chain.dat")
}

pub fn keys(data: &Path) -> Result<KeyStore, Fail> {
    Ok(KeyStore::load(&keys_path(data))?)
}

pub fn save_keys(data: &Path, keys: &KeyStore) -> Result<(), Fail> {
    std::fs::create_dir_all(data).map_err(|e| Fail::io(data, e))?;
    Ok(keys.save(&keys_path(data))?)
}

pub fn params(data: &Path) -> Result<ChainParams, Fail> {
    let path = params_path(data);
    let text = std::fs::read_to_string(&path).map_err(|e| Fail::io(&path, e))?;
    parse_params(&path, &text)
}

fn parse_params(path: &Path, text: &str) -> Result<ChainParams, Fail> {
    let params: ChainParams =
        toml::from_str(text).map_err(|e| Fail::config(format!("{}: {}", path.display(), e.message())))?;
    if let Some((key, msg)) = params.problems().into_iter().next() {
        return Err(Fail::config(format!("{}: {key}: {msg}", path.display())));
    }
    Ok(params)
}

/// `None` when no chain has been initialised here.
pub fn try_open(data: &Path) -> Result<Option<ChainStore>, Fail> {
    if !chain_path(data).exists() {
        return Ok(None);
    }
    open(data).map(Some)
}

pub fn open(data: &Path) -> Result<ChainStore, Fail> {
    let params = params(data)?;
    let rules = ValidationRules::from_params(&params);
    let path = chain_path(data);
    Ok(ChainStore::load(&path, params, rules)?)
}

fn save(data: &Path, store: &ChainStore) -> Result<(), Fail> {
    Ok(store.save(&chain_path(data))?)
}

pub fn default_params(keys: &KeyStore, fund: u64) -> ChainParams {
    ChainParams {
        genesis_allocation: keys
            .records()
            .iter()
            .map(|r| Allocation {
                address: r.address(),
                amount: fund,
                staked: false,
            })
            .collect(),
        consensus: ConsensusParams::Pow(PowParams {
            target: Target::from_bits(LOCAL_POW_BITS),
            retarget_interval: 16,
            target_spacing: 1,
        }),
        ..ChainParams::default()
    }
}

pub fn init(data: &Path, params_file: Option<&Path>, fund: u64) -> Result<(), Fail> {
    if chain_path(data).exists() {
        return Err(Fail::config(format!("{} already exists", chain_path(data).display())));
    }
    let params = match params_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Fail::io(p, e))?;
            parse_params(p, &text)?
        }
        None => default_params(&keys(data)?, fund),
    };
    if !matches!(params.consensus, ConsensusParams::Pow(_)) {
        return Err(Fail::config("consensus.model: the local chain mines with pow only"));
    }
    let store = ChainStore::with_params(params.clone()).map_err(Fail::config)?;
    std::fs::create_dir_all(data).map_err(|e| Fail::io(data, e))?;
    let text = toml::to_string(&params).map_err(|e| Fail::new(EXIT_IO, e))?;
    blocklab::fsutil::write_atomic(&params_path(data), text.as_bytes())
        .map_err(|e| Fail::io(&params_path(data), e))?;
    save(data, &store)?;
    println!("genesis={} allocations={}", store.tip_hash(), params.genesis_allocation.len());
    Ok(())
}

/// Mine one block holding `txs` on the tip, paying the reward to `reward_to`.
fn mine(store: &mut ChainStore, txs: Vec<Transaction>, fees: u64, reward_to: Address) -> Result<(), Fail> {
    let ts = store.tip().header.timestamp + 1;
    let candidate = store.candidate(txs, fees, reward_to, ts);
    let (block, _) = seal_pow(candidate, 0, u64::MAX).map_err(|e| Fail::new(EXIT_IO, e))?;
    match store.append_block(block) {
        AppendOutcome::Rejected(e) => Err(Fail::new(EXIT_CONFIG, format!("block rejected: {e}"))),
        _ => Ok(()),
    }
}

fn signer(data: &Path, who: &str) -> Result<KeyPair, Fail> {
    let keys = keys(data)?;
    let rec = keys
        .by_label(who)
        .or_else(|| who.parse().ok().and_then(|a| keys.by_address(&a)))
        .ok_or_else(|| Fail::new(EXIT_NOT_FOUND, format!("no stored key {who:?}")))?;
    Ok(rec.key.clone())
}

fn contract_tx(store: &ChainStore, key: &KeyPair, kind: TxKind, payload: Vec<u8>, fee: u64) -> Result<Transaction, Fail> {
    let from = key.address(USER_ADDRESS_VERSION);
    let utxo = &store.state().utxo;
    let spend = select_coins(&from, fee.max(1), utxo)
        .ok_or_else(|| Fail::config(format!("{from} cannot cover fee {fee}")))?;
    let req = TxRequest {
        kind,
        spend,
        pay: Vec::new(),
        fee,
        payload,
        keys: std::slice::from_ref(key),
    };
    build(&req, utxo).map_err(|e| Fail::config(format!("transaction: {e}")))
}

pub fn deploy(data: &Path, from: &str, code: &Bytecode, fee: u64) -> Result<(), Fail> {
    let key = signer(data, from)?;
    let mut store = open(data)?;
    let creator = key.address(USER_ADDRESS_VERSION);
    let contract = derive_contract_address(&creator, store.state().contracts.deploy_count(&creator));
    let tx = contract_tx(&store, &key, TxKind::ContractDeploy, code.encode(), fee)?;
    let id = tx.tx_id();
    mine(&mut store, vec![tx], fee, creator)?;
    save(data, &store)?;
    println!("contract={contract} tx={id} height={}", store.height());
    Ok(())
}

pub fn call(data: &Path, from: &str, contract: &Address, input: &[u64], fee: u64) -> Result<(), Fail> {
    let key = signer(data, from)?;
    let mut store = open(data)?;
    if store.state().contracts.get(contract).is_none() {
        return Err(Fail::new(EXIT_NOT_FOUND, format!("no contract at {contract}")));
    }
    let tx = contract_tx(&store, &key, TxKind::ContractCall, encode_call_payload(contract, input), fee)?;
    let id = tx.tx_id();
    mine(&mut store, vec![tx], fee, key.address(USER_ADDRESS_VERSION))?;
    save(data, &store)?;
    let receipt = store
        .state()
        .contracts
        .receipt(&id)
        .ok_or_else(|| Fail::new(EXIT_IO, "call left no receipt"))?;
    let status = match receipt.status {
        ExecStatus::Ok => "ok".to_owned(),
        ExecStatus::OutOfGas => "out_of_gas".to_owned(),
        ExecStatus::Trap(r) => format!("trap:{r:?}"),
    };
    let output: Vec<String> = receipt.output.iter().map(u64::to_string).collect();
    println!("status={status} gas_used={} output=[{}] tx={id}", receipt.gas_used, output.join(","));
    Ok(())
}
