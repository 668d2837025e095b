#![allow(dead_code)]

pub mod sim;

use blocklab::chain::{seal_pow, Allocation, Block, ChainParams, ChainStore};
use blocklab::consensus::{ConsensusParams, PowParams, Target};
use blocklab::crypto::{Address, KeyPair};
use blocklab::ledger::{OutPoint, Transaction};

pub fn key(n: u8) -> KeyPair {
    KeyPair::from_seed(&[n; 32]).unwrap()
}

pub fn addr(k: &KeyPair) -> Address {
    k.address(0)
}

pub fn op(tx: &Transaction, i: u32) -> OutPoint {
    OutPoint::new(tx.tx_id(), i)
}

pub fn alloc(pairs: &[(&KeyPair, u64)]) -> Vec<Allocation> {
    pairs
        .iter()
        .map(|(k, amount)| Allocation {
            address: addr(k),
            amount: *amount,
            staked: false,
        })
        .collect()
}

/// PoW chain at a 4-bit target, so mining takes ~16 hashes.
pub fn pow_params(allocation: Vec<Allocation>) -> ChainParams {
    ChainParams {
        genesis_allocation: allocation,
        consensus: ConsensusParams::Pow(PowParams {
            target: Target::from_bits(4),
            retarget_interval: 1_000_000,
            target_spacing: 10,
        }),
        ..ChainParams::default()
    }
}

/// Mine the next block on the store's tip without appending it.
pub fn mine(store: &ChainStore, txs: Vec<Transaction>, fees: u64, reward_to: Address, timestamp: u64) -> Block {
    let b = store.candidate(txs, fees, reward_to, timestamp);
    seal_pow(b, 0, u64::MAX).unwrap().0
}

/// Mine and append; panics unless the block extends the tip.
pub fn extend(store: &mut ChainStore, txs: Vec<Transaction>, fees: u64, reward_to: Address) -> Block {
    let ts = store.tip().header.timestamp + 10;
    let b = mine(store, txs, fees, reward_to, ts);
    let out = store.append_block(b.clone());
    assert!(
        matches!(out, blocklab::chain::AppendOutcome::Extended { .. }),
        "{out:?}"
    );
    b
}

/// Two publishers race on the same parent: branch A carries tx {1,2,3},
/// branch B carries {1,2,4}, and B then grows by one block. Returns the
/// observing node's event sequence.
pub fn two_branch_conflict() -> Vec<String> {
    use blocklab::chain::AppendOutcome;
    use blocklab::ledger::{build_transaction, Mempool};

    let payers: Vec<KeyPair> = (1..=4).map(key).collect();
    let sink = addr(&key(9));
    let (pub_a, pub_b) = (addr(&key(20)), addr(&key(21)));
    let params = pow_params(alloc(&[(&payers[0], 100), (&payers[1], 100), (&payers[2], 100), (&payers[3], 100)]));
    let mut node = ChainStore::with_params(params.clone()).unwrap();
    let g = node.genesis().transactions[0].clone();
    let txs: Vec<Transaction> = payers
        .iter()
        .enumerate()
        .map(|(i, k)| {
            build_transaction(&[op(&g, i as u32)], &[(sink, 50)], 1, std::slice::from_ref(k), &node.state().utxo).unwrap()
        })
        .collect();
    let mut pool = Mempool::new();
    for t in &txs {
        pool.add(t.clone(), &node.state().utxo).unwrap();
    }
    let name = |id| {
        txs.iter()
            .position(|t| t.tx_id() == id)
            .map(|i| format!("tx{}", i + 1))
            .unwrap_or_else(|| "coinbase".into())
    };

    let a1 = mine(&node, vec![txs[0].clone(), txs[1].clone(), txs[2].clone()], 3, pub_a, 10);
    let mut other = ChainStore::with_params(params).unwrap();
    let b1 = mine(&other, vec![txs[0].clone(), txs[1].clone(), txs[3].clone()], 3, pub_b, 11);
    assert!(other.append_block(b1.clone()).is_accepted());
    let b2 = mine(&other, Vec::new(), 0, pub_b, 21);

    let label = |b: &Block| {
        if *b == a1 {
            "A1"
        } else if *b == b1 {
            "B1"
        } else if *b == b2 {
            "B2"
        } else {
            "?"
        }
    };
    let mut events = Vec::new();
    for b in [&a1, &b1, &b2] {
        let out = node.append_block(b.clone());
        node.update_mempool(&mut pool, &out);
        events.push(match &out {
            AppendOutcome::Extended { height, .. } => format!("extended {} at {height}", label(b)),
            AppendOutcome::SideBranch { height, .. } => format!("side branch {} at {height}", label(b)),
            AppendOutcome::Reorganized(r) => format!(
                "reorganized at fork {} orphaning [{}] adopting [{}]",
                r.fork_height,
                r.orphaned.iter().map(label).collect::<Vec<_>>().join(","),
                r.adopted.iter().map(label).collect::<Vec<_>>().join(",")
            ),
            AppendOutcome::Rejected(e) => format!("rejected {}: {e}", label(b)),
        });
        let mut pending: Vec<String> = pool.iter().map(|(id, _)| name(*id)).collect();
        pending.sort();
        events.push(format!("mempool [{}]", pending.join(",")));
    }
    for (i, t) in txs.iter().enumerate() {
        if let Some(d) = node.depth_of(&t.tx_id()) {
            events.push(format!("tx{} on chain at depth {d}", i + 1));
        }
    }
    events
}

pub const TWO_BRANCH_EVENTS: &[&str] = &[
    "extended A1 at 1",
    "mempool [tx4]",
    "side branch B1 at 1",
    "mempool [tx4]",
    "reorganized at fork 0 orphaning [A1] adopting [B1,B2]",
    "mempool [tx3]",
    "tx1 on chain at depth 1",
    "tx2 on chain at depth 1",
    "tx4 on chain at depth 1",
];

/// Mean attempts to find a solution at `difficulty` leading hex zeros, over
/// `trials` distinct prefixes.
pub fn mean_attempts(difficulty: u32, trials: u32) -> f64 {
    let total: u64 = (0..trials)
        .map(|i| {
            blocklab::crypto::solve_string_puzzle(&format!("trial-{difficulty}-{i}"), difficulty, 0, None)
                .unwrap()
                .attempts
        })
        .sum();
    total as f64 / trials as f64
}

/// Times the first of two weights is picked over `draws` seeded draws.
pub fn two_way_wins(pick: impl Fn(f64) -> bool, draws: u32, seed: u64) -> u32 {
    let mut s = blocklab::crypto::HashStream::from_u64(seed, b"draws");
    (0..draws).filter(|_| pick(s.next_unit())).count() as u32
}

/// Successes of the 42% holder over 10,000 chain-PoS selections.
pub fn pos_42_count() -> u32 {
    use blocklab::consensus::{pos_select_chain, StakeEntry, StakeView};
    let (a, b) = (addr(&key(1)), addr(&key(2)));
    let mut entries: Vec<StakeEntry> = [(a, 42u64), (b, 58)]
        .iter()
        .enumerate()
        .map(|(i, (address, amount))| StakeEntry {
            outpoint: OutPoint::new(blocklab::crypto::sha256(&[i as u8]), 0),
            address: *address,
            staked_amount: *amount,
            stake_height: 0,
            age_origin: 0,
        })
        .collect();
    entries.sort_by_key(|e| e.address);
    let view = StakeView { entries };
    two_way_wins(|r| pos_select_chain(&view, r).unwrap() == a, 10_000, 42)
}
