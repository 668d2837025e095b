mod common;

use blocklab::chain::*;
use blocklab::consensus::*;
use blocklab::crypto::{Address, KeyPair};
use blocklab::ledger::{balance, build_stake, build_transaction, Transaction, TxOutput};
use common::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn funded_store() -> (ChainStore, KeyPair, KeyPair) {
    let (a, b) = (key(1), key(2));
    let store = ChainStore::with_params(pow_params(alloc(&[(&a, 1000), (&b, 500)]))).unwrap();
    (store, a, b)
}

fn supply_matches(store: &ChainStore) {
    let st = store.state();
    assert_eq!(st.utxo.total(), st.expected_supply());
}

#[test]
fn transfers_confirm_after_k_blocks() {
    let (mut store, a, b) = funded_store();
    let g = store.genesis().transactions[0].clone();
    let tx = build_transaction(&[op(&g, 0)], &[(addr(&b), 300)], 5, std::slice::from_ref(&a), &store.state().utxo).unwrap();
    let miner = addr(&key(7));
    extend(&mut store, vec![tx.clone()], 5, miner);
    assert_eq!(balance(&addr(&b), &store.state().utxo).unlocked, 800);
    assert_eq!(balance(&addr(&a), &store.state().utxo).unlocked, 695);
    assert_eq!(balance(&miner, &store.state().utxo).unlocked, 55);
    assert_eq!(store.depth_of(&tx.tx_id()), Some(0));
    for i in 0..6 {
        assert!(!store.is_confirmed(&tx.tx_id()), "confirmed after {i} blocks");
        extend(&mut store, Vec::new(), 0, miner);
    }
    assert!(store.is_confirmed(&tx.tx_id()));
    supply_matches(&store);
    let st = store.state();
    assert_eq!(st.utxo.total(), 1500 + 7 * 50);
    assert_eq!(verify_chain(&store).unwrap().tip_height, 7);
}

#[test]
fn two_branch_conflict_sequence() {
    assert_eq!(two_branch_conflict(), TWO_BRANCH_EVENTS);
}

#[test]
fn block_rules_reject() {
    let (store, a, b) = funded_store();
    let g = store.genesis().transactions[0].clone();
    let miner = addr(&key(7));
    let tip_ts = store.tip().header.timestamp;
    let reject = |b: Block| match store.clone().append_block(b) {
        AppendOutcome::Rejected(e) => e,
        other => panic!("accepted: {other:?}"),
    };

    let greedy = {
        let mut blk = store.candidate(Vec::new(), 0, miner, tip_ts + 1);
        blk.transactions[0].outputs[0].amount = 51;
        let blk = Block::assemble(blk.header, blk.transactions);
        seal_pow(blk, 0, u64::MAX).unwrap().0
    };
    assert_eq!(reject(greedy), BlockError::Reward { claimed: 51, allowed: 50 });

    let spend = build_transaction(&[op(&g, 0)], &[(addr(&b), 1)], 0, std::slice::from_ref(&a), &store.state().utxo).unwrap();
    let twice = mine(&store, vec![spend.clone(), spend], 0, miner, tip_ts + 1);
    assert!(matches!(reject(twice), BlockError::Tx { index: 2, .. }));

    let stale = mine(&store, Vec::new(), 0, miner, 0);
    assert!(matches!(reject(stale), BlockError::Timestamp { .. }));

    let mut wrong_hash = mine(&store, Vec::new(), 0, miner, 5);
    wrong_hash.header.data_hash.0[0] ^= 1;
    assert_eq!(reject(wrong_hash), BlockError::DataHash);

    let mut unmined = store.candidate(Vec::new(), 0, miner, 5);
    while pow_check(&unmined.header, &Target::from_bits(4)) {
        unmined.header.nonce += 1;
    }
    assert_eq!(reject(unmined), BlockError::Consensus(ConsensusError::InsufficientWork));

    let mut other_parent = mine(&store, Vec::new(), 0, miner, 5);
    other_parent.header.prev_hash.0[3] ^= 1;
    assert!(matches!(reject(other_parent), BlockError::UnknownParent(_)));

    let cb_only = Transaction::coinbase(2, vec![TxOutput { amount: 1, recipient: miner }]);
    let misplaced = mine(&store, vec![cb_only], 0, miner, 5);
    assert_eq!(reject(misplaced), BlockError::ExtraCoinbase(1));
}

#[test]
fn failed_reorg_restores_the_old_chain() {
    let (mut store, _, _) = funded_store();
    let miner = addr(&key(7));
    let base = store.clone();
    extend(&mut store, Vec::new(), 0, miner);
    extend(&mut store, Vec::new(), 0, miner);
    let before_tip = store.tip_hash();
    let before_utxo = store.state().utxo.clone();

    let mut side = base;
    let s1 = extend(&mut side, Vec::new(), 0, addr(&key(8)));
    let s2 = extend(&mut side, Vec::new(), 0, addr(&key(8)));
    let mut bad = side.candidate(Vec::new(), 0, addr(&key(8)), side.tip().header.timestamp + 10);
    bad.transactions[0].outputs[0].amount = 1000;
    let bad = seal_pow(Block::assemble(bad.header, bad.transactions), 0, u64::MAX).unwrap().0;

    assert!(matches!(store.append_block(s1), AppendOutcome::SideBranch { .. }));
    assert!(matches!(store.append_block(s2), AppendOutcome::SideBranch { .. }));
    let out = store.append_block(bad.clone());
    assert!(matches!(out, AppendOutcome::Rejected(BlockError::Reward { .. })), "{out:?}");
    assert_eq!(store.tip_hash(), before_tip);
    assert_eq!(store.state().utxo, before_utxo);
    assert!(matches!(store.status(&bad.hash()), Some(BlockStatus::Invalid(_))));
    supply_matches(&store);
    verify_chain(&store).unwrap();
}

/// A master store grows a tree of blocks: a main chain and two shorter
/// side branches.
fn block_tree() -> (ChainStore, Vec<Block>) {
    let (mut master, a, b) = funded_store();
    let g = master.genesis().transactions[0].clone();
    let miner = addr(&key(7));
    let mut all = Vec::new();
    let mut forks = Vec::new();
    for h in 0..10u64 {
        if h == 2 || h == 6 {
            forks.push(master.clone());
        }
        let txs = match h {
            1 => vec![build_transaction(&[op(&g, 0)], &[(addr(&b), 10)], 2, std::slice::from_ref(&a), &master.state().utxo).unwrap()],
            _ => Vec::new(),
        };
        let fee = txs.len() as u64 * 2;
        all.push(extend(&mut master, txs, fee, miner));
    }
    for (i, mut f) in forks.into_iter().enumerate() {
        for _ in 0..(2 + i) {
            let ts = f.tip().header.timestamp + 3;
            let blk = mine(&f, Vec::new(), 0, addr(&key(30 + i as u8)), ts);
            assert!(f.append_block(blk.clone()).is_accepted());
            all.push(blk);
        }
    }
    (master, all)
}

fn feed(blocks: &[Block], params: &ChainParams) -> ChainStore {
    let mut store = ChainStore::with_params(params.clone()).unwrap();
    let mut waiting: Vec<Block> = blocks.to_vec();
    while !waiting.is_empty() {
        let before = waiting.len();
        waiting.retain(|b| match store.append_block(b.clone()) {
            AppendOutcome::Rejected(BlockError::UnknownParent(_)) => true,
            AppendOutcome::Rejected(e) => panic!("valid block rejected: {e}"),
            _ => false,
        });
        assert!(waiting.len() < before, "no progress");
    }
    store
}

#[test]
fn any_delivery_order_converges() {
    let (master, blocks) = block_tree();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let mut order = blocks.clone();
        order.shuffle(&mut rng);
        let s = feed(&order, master.params());
        assert_eq!(s.tip_hash(), master.tip_hash());
        assert_eq!(s.state().utxo, master.state().utxo);
        assert_eq!(s.len(), blocks.len() + 1);
        supply_matches(&s);
    }
}

#[test]
fn checkpoints_forbid_deep_reorgs() {
    let (mut store, _, _) = funded_store();
    let miner = addr(&key(7));
    let mut forks = Vec::new();
    for h in 0..6 {
        if h == 2 || h == 4 {
            forks.push(store.clone());
        }
        extend(&mut store, Vec::new(), 0, miner);
    }
    assert_eq!(store.set_checkpoint(3).unwrap(), store.hash_at(3).unwrap());
    assert!(store.set_checkpoint(9).is_err());
    assert!(store.set_checkpoint(2).is_err());

    let grow = |mut f: ChainStore, n: usize| {
        (0..n)
            .map(|_| extend(&mut f, Vec::new(), 0, addr(&key(40))))
            .collect::<Vec<_>>()
    };
    let deep = grow(forks.remove(0), 6);
    let mut outcomes = deep.into_iter().map(|b| store.append_block(b));
    assert!(matches!(outcomes.next(), Some(AppendOutcome::Rejected(BlockError::Checkpoint(3)))));
    assert!(outcomes.all(|o| !o.is_accepted()));
    let before = store.tip_hash();

    let shallow = grow(forks.remove(0), 4);
    let outs: Vec<_> = shallow.into_iter().map(|b| store.append_block(b)).collect();
    assert!(matches!(outs[1], AppendOutcome::SideBranch { height: 6, .. }));
    match &outs[2] {
        AppendOutcome::Reorganized(r) => {
            assert_eq!(r.fork_height, 4);
            assert_eq!(r.depth(), 2);
            assert_eq!(r.orphaned.last().unwrap().hash(), before);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(outs[3], AppendOutcome::Extended { height: 8, .. }));
    assert_eq!(store.height(), 8);
}

#[test]
fn chain_file_round_trip_and_damage() {
    let (master, blocks) = block_tree();
    let master = feed(&blocks, master.params());
    let bytes = master.encode_file();
    let loaded = ChainStore::from_file_bytes(&bytes, master.params().clone(), *master.rules()).unwrap();
    assert_eq!(loaded.tip_hash(), master.tip_hash());
    assert_eq!(loaded.len(), blocks.len() + 1);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.bin");
    master.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(ChainStore::load(&path, master.params().clone(), *master.rules()).unwrap().tip_hash(), master.tip_hash());

    for cut in [bytes.len() - 1, bytes.len() - 5, 40] {
        let e = decode_chain_file(&bytes[..cut]).unwrap_err();
        assert!(matches!(e, PersistError::Truncated { .. }), "{e}");
        assert!(e.is_corruption());
    }
    let mut flipped = bytes.clone();
    flipped[200] ^= 0x10;
    assert!(matches!(decode_chain_file(&flipped), Err(PersistError::Checksum { .. })));
    assert!(matches!(decode_chain_file(b"NOPE\x00\x01"), Err(PersistError::BadMagic)));
    let mut other_version = bytes.clone();
    other_version[5] = 9;
    assert!(matches!(decode_chain_file(&other_version), Err(PersistError::Version(9))));

    let other = pow_params(alloc(&[(&key(1), 999)]));
    let e = ChainStore::from_file_bytes(&bytes, other.clone(), ValidationRules::from_params(&other)).unwrap_err();
    assert!(matches!(e, PersistError::Genesis));
}

#[test]
fn longest_chain_from_records() {
    let (master, blocks) = block_tree();
    let mut with_genesis = vec![master.genesis().clone()];
    with_genesis.extend(blocks);
    let main = longest_chain(&with_genesis);
    assert_eq!(main.len() as u64, master.height() + 1);
    assert_eq!(main.last().unwrap().hash(), master.tip_hash());
    verify_blocks(&main, master.params(), master.rules(), None).unwrap();
}

#[test]
fn retarget_follows_block_spacing() {
    let mut params = pow_params(Vec::new());
    let ConsensusParams::Pow(p) = &mut params.consensus else { unreachable!() };
    p.retarget_interval = 4;
    p.target = Target::from_bits(2);
    let start = p.target;
    let mut store = ChainStore::with_params(params).unwrap();
    let miner = addr(&key(7));
    for h in 1..=3u64 {
        let b = mine(&store, Vec::new(), 0, miner, 5 * h);
        assert!(store.append_block(b).is_accepted());
    }
    let next = store.next_target().unwrap();
    assert_eq!(next.to_biguint(), start.to_biguint() / 2u8);

    let mut stale = store.candidate(Vec::new(), 0, miner, 20);
    stale.header.consensus_tag = ConsensusTag::Pow { target: start }.encode();
    let stale = seal_pow(stale, 0, u64::MAX).unwrap().0;
    assert_eq!(
        store.clone().append_block(stale),
        AppendOutcome::Rejected(BlockError::Consensus(ConsensusError::WrongTarget))
    );
    let b = mine(&store, Vec::new(), 0, miner, 20);
    assert!(store.append_block(b).is_accepted());
    verify_chain(&store).unwrap();
}

fn signed_params(consensus: ConsensusParams, allocation: Vec<Allocation>) -> ChainParams {
    ChainParams {
        genesis_allocation: allocation,
        consensus,
        seed: 11,
        ..ChainParams::default()
    }
}

/// Publish `n` blocks, each by whichever key has the earliest turn.
fn run_signed(store: &mut ChainStore, keys: &[KeyPair], n: usize) -> Vec<Address> {
    let mut winners = Vec::new();
    for _ in 0..n {
        let (k, t) = keys
            .iter()
            .filter_map(|k| store.next_ticket(&addr(k), 0).map(|t| (k, t)))
            .min_by_key(|(k, t)| (t.timestamp, addr(k)))
            .expect("someone may publish");
        let b = store.signed_block(k, &t, Vec::new(), 0);
        let out = store.append_block(b);
        assert!(matches!(out, AppendOutcome::Extended { .. }), "{out:?}");
        winners.push(addr(k));
    }
    winners
}

fn impostor_rejected(store: &ChainStore, keys: &[KeyPair]) {
    let (k, t) = keys
        .iter()
        .filter_map(|k| store.next_ticket(&addr(k), 0).map(|t| (k, t)))
        .min_by_key(|(_, t)| t.timestamp)
        .unwrap();
    let wrong = keys.iter().find(|x| addr(x) != addr(k)).unwrap();
    let forged = store.signed_block(wrong, &t, Vec::new(), 0);
    let out = store.clone().append_block(forged);
    assert!(matches!(out, AppendOutcome::Rejected(BlockError::Consensus(_))), "{out:?}");

    let mut tampered = store.signed_block(k, &t, Vec::new(), 0);
    tampered.header.nonce += 1;
    assert_eq!(
        store.clone().append_block(tampered),
        AppendOutcome::Rejected(BlockError::Consensus(ConsensusError::BadSignature))
    );
}

#[test]
fn round_robin_takes_turns() {
    let keys: Vec<KeyPair> = (1..=3).map(key).collect();
    let rr = RoundRobinParams {
        publishers: keys.iter().map(addr).collect(),
        ..Default::default()
    };
    let mut store = ChainStore::with_params(signed_params(ConsensusParams::RoundRobin(rr), Vec::new())).unwrap();
    impostor_rejected(&store, &keys);
    let w = run_signed(&mut store, &keys, 6);
    assert_eq!(w, [1, 2, 0, 1, 2, 0].map(|i| addr(&keys[i])));

    let (live, down) = (&keys[..1], &keys[1]);
    let t = store.next_ticket(&addr(down), 0).unwrap();
    assert_eq!(t.slot, 0);
    let w = run_signed(&mut store, live, 1);
    assert_eq!(w, vec![addr(&keys[0])]);
    assert_eq!(store.tip().header.timestamp - store.block_at(6).unwrap().header.timestamp, 10 + 2 * 5);
    verify_chain(&store).unwrap();
}

#[test]
fn poa_and_stake_chains_verify() {
    let keys: Vec<KeyPair> = (1..=3).map(key).collect();
    let mut poa = PoaParams::default();
    for (k, r) in keys.iter().zip([50, 30, 0]) {
        poa.authorities.insert(addr(k), r);
    }
    let mut store = ChainStore::with_params(signed_params(ConsensusParams::Poa(poa), Vec::new())).unwrap();
    impostor_rejected(&store, &keys);
    let w = run_signed(&mut store, &keys, 30);
    assert!(!w.contains(&addr(&keys[2])));
    verify_chain(&store).unwrap();

    let staked: Vec<Allocation> = keys
        .iter()
        .zip([300, 100, 0])
        .map(|(k, amount)| Allocation {
            address: addr(k),
            amount,
            staked: true,
        })
        .collect();
    for consensus in [
        ConsensusParams::PosChain(PosChainParams::default()),
        ConsensusParams::PosCoinage(PosCoinAgeParams {
            age_threshold: 2,
            ..Default::default()
        }),
    ] {
        let mut store = ChainStore::with_params(signed_params(consensus, staked.clone())).unwrap();
        impostor_rejected(&store, &keys);
        let w = run_signed(&mut store, &keys, 20);
        assert!(!w.contains(&addr(&keys[2])));
        assert_eq!(store.state().utxo.total_locked(), 400);
        verify_chain(&store).unwrap();
        supply_matches(&store);
    }
}

#[test]
fn coin_age_resets_survive_reorg() {
    let keys: Vec<KeyPair> = (1..=2).map(key).collect();
    let staked = keys
        .iter()
        .map(|k| Allocation {
            address: addr(k),
            amount: 100,
            staked: true,
        })
        .collect();
    let consensus = ConsensusParams::PosCoinage(PosCoinAgeParams {
        age_threshold: 1,
        ..Default::default()
    });
    let mut store = ChainStore::with_params(signed_params(consensus, staked)).unwrap();
    let before = store.state().age_origins.clone();
    let snapshot = store.clone();
    run_signed(&mut store, &keys, 3);
    assert_ne!(store.state().age_origins, before);
    let mut replay = snapshot;
    for b in store.main_chain().skip(1) {
        assert!(replay.append_block(b.clone()).is_accepted());
    }
    assert_eq!(replay.state().age_origins, store.state().age_origins);
}

#[test]
fn poet_shortest_wait_publishes() {
    let keys: Vec<KeyPair> = (1..=4).map(key).collect();
    let poet = PoetParams {
        publishers: keys.iter().map(addr).collect(),
        mean_wait: 10,
    };
    let mut store = ChainStore::with_params(signed_params(ConsensusParams::Poet(poet.clone()), Vec::new())).unwrap();
    impostor_rejected(&store, &keys);
    for _ in 0..10 {
        let h = store.height();
        let certs: Vec<_> = keys.iter().map(|k| poet_draw(&addr(k), h, 11, 10)).collect();
        let shortest = certs.iter().map(wait_ticks).min().unwrap();
        let won = run_signed(&mut store, &keys, 1)[0];
        let cert = certs.iter().find(|c| c.node == won).unwrap();
        assert_eq!(wait_ticks(cert), shortest);
        if certs.iter().filter(|c| wait_ticks(c) == shortest).count() == 1 {
            assert_eq!(poet_winner(&certs), Some(won));
        }
    }
    let outsider = key(99);
    let t = store.next_ticket(&addr(&keys[0]), 0).unwrap();
    let mut cert = PoetCertificate::decode(&t.extra).unwrap();
    cert.node = addr(&outsider);
    let forged = PublishTicket {
        extra: cert.encode(),
        ..t
    };
    let out = store.clone().append_block(store.signed_block(&outsider, &forged, Vec::new(), 0));
    assert_eq!(out, AppendOutcome::Rejected(BlockError::Consensus(ConsensusError::BadCertificate)));
    verify_chain(&store).unwrap();
}

#[test]
fn stake_transactions_lock_funds_in_chain() {
    let (mut store, a, _) = funded_store();
    let g = store.genesis().transactions[0].clone();
    let st = build_stake(&[op(&g, 0)], 400, 1, std::slice::from_ref(&a), &store.state().utxo).unwrap();
    extend(&mut store, vec![st], 1, addr(&key(7)));
    let bal = balance(&addr(&a), &store.state().utxo);
    assert_eq!((bal.unlocked, bal.locked_stake), (599, 400));
    assert_eq!(store.state().stake_view().by_address(), vec![(addr(&a), 400)]);
}
