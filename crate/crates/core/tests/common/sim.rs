//! Scenario helpers and the multi-node checks shared by the netsim tests
//! and the acceptance run.

use std::collections::BTreeSet;
use std::path::PathBuf;

use blocklab::chain::ChainStore;
use blocklab::contracts::{counter_program, derive_contract_address, encode_call_payload, Storage};
use blocklab::crypto::Address;
use blocklab::ledger::{build, build_transaction, OutPoint, TxKind, TxRequest};
use blocklab::netsim::*;

/// Event-log sha256 of `honest_pow_10.cfg` at its configured seed (42),
/// checked against hashlib over the written `events.log`.
pub const HONEST_POW_10_LOG_HASH: &str = "d38ca12a871f804d9c301f4285b89cd7f1bd72810a98be7b4884ed61cc3594ae";

pub fn check_frozen_log_hash() {
    let cfg = scenario("honest_pow_10.cfg");
    assert_eq!(cfg.seed, 42);
    assert_eq!(run_scenario(cfg).log_hash().to_hex(), HONEST_POW_10_LOG_HASH);
}

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario(name: &str) -> SimConfig {
    load_scenario(&scenario_dir().join(name)).unwrap()
}

pub fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    v.sort();
    v
}

pub fn store<'a>(sim: &'a Simulation, name: &str) -> &'a ChainStore {
    sim.node(name).unwrap().store().unwrap()
}

pub fn genesis_coin(sim: &Simulation, name: &str) -> OutPoint {
    let addr = node_address(name);
    let s = store(sim, name);
    let gid = s.genesis().transactions[0].tx_id();
    let (op, _) = s
        .state()
        .utxo
        .owned_by(&addr)
        .find(|(op, e)| op.tx_id == gid && !e.locked)
        .expect("genesis coin");
    *op
}

pub fn attack_cfg(seed: u64, share: f64) -> SimConfig {
    let mut cfg = scenario("majority_attack.cfg");
    cfg.seed = seed;
    cfg.duration = 1500;
    cfg.adversary.as_mut().unwrap().controlled_share = Some(share);
    cfg
}

/// Every bundled scenario, every node: UTXO total equals genesis plus subsidies.
pub fn check_conservation() {
    for path in bundled() {
        let cfg = load_scenario(&path).unwrap();
        let mut sim = Simulation::new(cfg.clone());
        sim.run_until(cfg.duration);
        let rows = sim.conservation();
        assert!(!rows.is_empty());
        for (node, utxo, issued) in rows {
            assert_eq!(utxo, issued, "{} node {node}", path.display());
        }
    }
}

/// Every bundled scenario replays to the same log and metrics.
pub fn check_replay() {
    for path in bundled() {
        let cfg = load_scenario(&path).unwrap();
        let a = run_scenario(cfg.clone());
        let b = run_scenario(cfg);
        assert_eq!(a.log_hash(), b.log_hash(), "{}", path.display());
        assert_eq!(a.metrics, b.metrics);
        assert!(a.log.len() > 20);
    }
}

pub fn check_majority_reorgs() {
    for seed in 0..10 {
        let strong = run_scenario(attack_cfg(seed, 0.6)).metrics;
        let weak = run_scenario(attack_cfg(seed, 0.1)).metrics;
        assert!(
            strong.reorgs.len() > weak.reorgs.len(),
            "seed {seed}: {} vs {}",
            strong.reorgs.len(),
            weak.reorgs.len()
        );
        assert!(weak.max_reorg_depth() <= 6, "seed {seed}");
        assert!(strong.max_reorg_depth() >= 4, "seed {seed}");
    }
}

pub fn check_hard_fork() {
    let cfg = scenario("hardfork_split.cfg");
    let act = cfg.fork.as_ref().unwrap().activation_height;
    let mut sim = Simulation::new(cfg.clone());
    while store(&sim, "a0").height() < act + 2 || store(&sim, "b0").height() < act + 2 {
        sim.step();
    }
    // one pre-fork coin, two conflicting spends, one per side
    let coin = genesis_coin(&sim, "a0");
    let key = sim.key_of("a0").unwrap().clone();
    let (pay_a, pay_b) = (node_address("a1"), node_address("b1"));
    let utxo = store(&sim, "a0").state().utxo.clone();
    let amount = utxo.get(&coin).unwrap().output.amount - 1;
    let tx_a = build_transaction(&[coin], &[(pay_a, amount)], 1, std::slice::from_ref(&key), &utxo).unwrap();
    let tx_b = build_transaction(&[coin], &[(pay_b, amount)], 1, std::slice::from_ref(&key), &utxo).unwrap();
    for n in ["a0", "a1", "a2"] {
        assert!(sim.submit_private(n, tx_a.clone()));
    }
    for n in ["b0", "b1", "b2"] {
        assert!(sim.submit_private(n, tx_b.clone()));
    }
    sim.run_until(cfg.duration);
    let (sa, sb) = (store(&sim, "a0"), store(&sim, "b0"));
    assert!(sa.is_confirmed(&tx_a.tx_id()));
    assert!(sb.is_confirmed(&tx_b.tx_id()));
    assert!(sa.depth_of(&tx_b.tx_id()).is_none() && sb.depth_of(&tx_a.tx_id()).is_none());
    assert_eq!(sa.hash_at(act - 1), sb.hash_at(act - 1));
    assert_ne!(sa.hash_at(act), sb.hash_at(act));
    assert!(sa.height() >= act + 5 && sb.height() >= act + 5);
    let out = sim.finish();
    assert!(out.metrics.fork_split);
    let rej = out.metrics.rejections_with("rule_version");
    assert_eq!(rej.keys().cloned().collect::<BTreeSet<_>>().len(), 6);
}

pub fn check_soft_fork() {
    let cfg = scenario("softfork.cfg");
    let f = cfg.fork.clone().unwrap();
    let limit = cfg.chain.max_block_data_bytes;
    let mut sim = Simulation::new(cfg.clone());
    sim.run_until(cfg.duration);
    sim.drain(20);
    let adopters: BTreeSet<String> = f.adopters.iter().cloned().collect();
    let reference = store(&sim, "w0");
    // every node ends on the adopters' chain, whose post-activation blocks
    // all respect the halved limit
    for n in sim.nodes() {
        assert_eq!(n.tip_hash(), reference.tip_hash(), "{}", n.name);
    }
    let adopter_addrs: Vec<Address> = f.adopters.iter().map(|a| node_address(a)).collect();
    let mut tight = 0;
    for b in reference.main_chain().filter(|b| b.height() >= f.activation_height) {
        assert!(b.header.size <= limit / 2);
        if adopter_addrs.contains(&b.transactions[0].outputs[0].recipient) {
            tight += 1;
        }
    }
    assert!(tight > 10);
    let out = sim.finish();
    let rej = out.metrics.rejections_with("too_large");
    assert!(!rej.is_empty());
    for node in rej.keys() {
        assert!(adopters.contains(node), "{node} rejected an oversized block");
    }
    let other: u64 = out
        .metrics
        .rejections
        .iter()
        .filter(|((_, r), _)| r != "too_large" && r != "invalid_ancestor")
        .map(|(_, n)| n)
        .sum();
    assert_eq!(other, 0, "{:?}", out.metrics.rejections);
}

/// Deploy the counter on a three-node network, call it five times, and
/// return each node's final contract storage.
pub fn counter_on_three_nodes() -> Vec<Storage> {
    let text = r#"
        seed = 2
        duration = 600
        [consensus]
        model = "pow"
        [[nodes]]
        name = "a"
        role = "publishing"
        hash_share = 0.5
        balance = 100
        [[nodes]]
        name = "b"
        role = "publishing"
        hash_share = 0.5
        [[nodes]]
        name = "c"
    "#;
    let cfg = SimConfig::from_toml(text).unwrap();
    let mut sim = Simulation::new(cfg);
    sim.run_until(5);
    let key = sim.key_of("a").unwrap().clone();
    let coin = genesis_coin(&sim, "a");
    let utxo = store(&sim, "a").state().utxo.clone();
    let deploy = build(
        &TxRequest {
            kind: TxKind::ContractDeploy,
            spend: vec![coin],
            pay: vec![(node_address("a"), 90)],
            fee: 10,
            payload: counter_program().encode(),
            keys: std::slice::from_ref(&key),
        },
        &utxo,
    )
    .unwrap();
    let contract = derive_contract_address(&node_address("a"), 0);
    sim.submit("a", deploy.clone());
    while !store(&sim, "c").is_confirmed(&deploy.tx_id()) {
        sim.step();
    }
    let mut spend = OutPoint::new(deploy.tx_id(), 0);
    for i in 0..5u64 {
        let utxo = store(&sim, "a").state().utxo.clone();
        let call = build(
            &TxRequest {
                kind: TxKind::ContractCall,
                spend: vec![spend],
                pay: vec![(node_address("a"), 88 - 2 * i)],
                fee: 2,
                payload: encode_call_payload(&contract, &[i]),
                keys: std::slice::from_ref(&key),
            },
            &utxo,
        )
        .unwrap();
        sim.submit("a", call.clone());
        while store(&sim, "a").depth_of(&call.tx_id()).is_none() {
            sim.step();
        }
        spend = OutPoint::new(call.tx_id(), 0);
    }
    sim.run_until(600);
    sim.drain(10);
    ["a", "b", "c"]
        .iter()
        .map(|n| store(&sim, n).state().contracts.get(&contract).unwrap().storage.clone())
        .collect()
}
