use blocklab::crypto::{Address, KeyPair, Signature};
use blocklab::ledger::*;
use proptest::prelude::*;

fn key(n: u8) -> KeyPair {
    KeyPair::from_seed(&[n; 32]).unwrap()
}

fn addr(k: &KeyPair) -> Address {
    k.address(0)
}

/// UTXO set funded by a genesis coinbase paying 100 to each key.
fn funded(keys: &[KeyPair]) -> (UtxoSet, Transaction) {
    let genesis = Transaction::coinbase(
        0,
        keys.iter()
            .map(|k| TxOutput {
                amount: 100,
                recipient: addr(k),
            })
            .collect(),
    );
    let mut utxo = UtxoSet::new();
    apply_tx(&genesis, 0, &mut utxo).unwrap();
    (utxo, genesis)
}

fn op(tx: &Transaction, i: u32) -> OutPoint {
    OutPoint::new(tx.tx_id(), i)
}

#[test]
fn transfer_moves_value_and_pays_change() {
    let (a, b) = (key(1), key(2));
    let (mut utxo, g) = funded(&[a.clone(), b.clone()]);
    let tx = build_transaction(&[op(&g, 0)], &[(addr(&b), 30)], 5, std::slice::from_ref(&a), &utxo).unwrap();
    assert_eq!(tx.outputs.len(), 2);
    assert_eq!(validate_transaction(&tx, &utxo).unwrap().fee, 5);
    apply_tx(&tx, 1, &mut utxo).unwrap();
    assert_eq!(balance(&addr(&a), &utxo).unlocked, 65);
    assert_eq!(balance(&addr(&b), &utxo).unlocked, 130);
    assert_eq!(utxo.total(), 195);
}

#[test]
fn rules_fire_in_order() {
    let (a, b) = (key(1), key(2));
    let (utxo, g) = funded(&[a.clone(), b.clone()]);
    let good = build_transaction(&[op(&g, 0)], &[(addr(&b), 10)], 0, std::slice::from_ref(&a), &utxo).unwrap();

    let mut unknown = good.clone();
    unknown.inputs[0].source_index = 9;
    assert!(matches!(validate_transaction(&unknown, &utxo), Err(TxError::UnknownInput(_))));

    let mut badsig = good.clone();
    badsig.inputs[0].signature = Signature(vec![1; 64]);
    assert_eq!(validate_transaction(&badsig, &utxo), Err(TxError::BadSignature(0)));

    // b signs a spend of a's output: the signature is valid, the owner is not
    let mut stolen = good.clone();
    stolen.inputs[0].public_key = b.public_key().clone();
    let id = stolen.tx_id();
    stolen.inputs[0].signature = b.sign(&id.0);
    assert_eq!(validate_transaction(&stolen, &utxo), Err(TxError::WrongOwner(0)));

    // inflate an output and re-sign so only the value rule fails
    let mut inflated = good.clone();
    inflated.outputs[1].amount = 95;
    let id = inflated.tx_id();
    inflated.inputs[0].signature = a.sign(&id.0);
    assert!(matches!(validate_transaction(&inflated, &utxo), Err(TxError::ValueCreated { .. })));

    let mut dup = good.clone();
    dup.inputs.push(dup.inputs[0].clone());
    let id = dup.tx_id();
    for i in &mut dup.inputs {
        i.signature = a.sign(&id.0);
    }
    assert!(matches!(validate_transaction(&dup, &utxo), Err(TxError::DuplicateInput(_))));

    let mut empty = good.clone();
    empty.inputs.clear();
    assert!(matches!(validate_transaction(&empty, &utxo), Err(TxError::Malformed(_))));

    let mut huge = good.clone();
    huge.outputs[0].amount = MAX_SUPPLY + 1;
    assert!(matches!(validate_transaction(&huge, &utxo), Err(TxError::Malformed(_))));
}

#[test]
fn double_spend_rejected_after_confirmation() {
    let (a, b) = (key(1), key(2));
    let (mut utxo, g) = funded(&[a.clone(), b.clone()]);
    let t1 = build_transaction(&[op(&g, 0)], &[(addr(&b), 10)], 0, std::slice::from_ref(&a), &utxo).unwrap();
    let t2 = build_transaction(&[op(&g, 0)], &[(addr(&a), 10)], 0, std::slice::from_ref(&a), &utxo).unwrap();
    apply_tx(&t1, 1, &mut utxo).unwrap();
    assert_eq!(validate_transaction(&t2, &utxo), Err(TxError::UnknownInput(op(&g, 0))));
}

#[test]
fn stake_locks_first_output_only() {
    let a = key(1);
    let (mut utxo, g) = funded(std::slice::from_ref(&a));
    let st = build_stake(&[op(&g, 0)], 60, 1, std::slice::from_ref(&a), &utxo).unwrap();
    apply_tx(&st, 1, &mut utxo).unwrap();
    let bal = balance(&addr(&a), &utxo);
    assert_eq!(bal.locked_stake, 60);
    assert_eq!(bal.unlocked, 39);
    assert_eq!(utxo.total_locked(), 60);

    // a locked output cannot be spent
    let mut spend = build_transaction(&[op(&st, 1)], &[], 0, std::slice::from_ref(&a), &utxo).unwrap();
    spend.inputs[0].source_index = 0;
    assert_eq!(validate_transaction(&spend, &utxo), Err(TxError::LockedInput(op(&st, 0))));
    assert_eq!(
        build_transaction(&[op(&st, 0)], &[], 0, &[a], &utxo),
        Err(BuildError::Unspendable(op(&st, 0)))
    );
}

#[test]
fn batch_is_atomic() {
    let (a, b) = (key(1), key(2));
    let (mut utxo, g) = funded(&[a.clone(), b.clone()]);
    let before = utxo.clone();
    let t1 = build_transaction(&[op(&g, 0)], &[(addr(&b), 10)], 0, std::slice::from_ref(&a), &utxo).unwrap();
    let t2 = build_transaction(&[op(&g, 0)], &[(addr(&b), 20)], 0, std::slice::from_ref(&a), &utxo).unwrap();
    let err = apply_transactions(&[t1.clone(), t2], 1, &mut utxo).unwrap_err();
    assert_eq!(err.index, 1);
    assert_eq!(utxo, before);

    let (undos, fees) = apply_transactions(std::slice::from_ref(&t1), 1, &mut utxo).unwrap();
    assert_eq!(fees, 0);
    revert_transactions(&[t1], &undos, &mut utxo);
    assert_eq!(utxo, before);
}

#[test]
fn mempool_conflicts_and_reorg_handling() {
    let (a, b) = (key(1), key(2));
    let (mut utxo, g) = funded(&[a.clone(), b.clone()]);
    let mut pool = Mempool::new();
    let t1 = build_transaction(&[op(&g, 0)], &[(addr(&b), 10)], 1, std::slice::from_ref(&a), &utxo).unwrap();
    let t2 = build_transaction(&[op(&g, 0)], &[(addr(&b), 11)], 1, std::slice::from_ref(&a), &utxo).unwrap();
    let t3 = build_transaction(&[op(&g, 1)], &[(addr(&a), 5)], 0, std::slice::from_ref(&b), &utxo).unwrap();
    let id1 = pool.add(t1.clone(), &utxo).unwrap();
    assert!(matches!(pool.add(t2.clone(), &utxo), Err(MempoolError::Conflict { .. })));
    assert_eq!(pool.add(t1.clone(), &utxo), Err(MempoolError::Duplicate(id1)));
    assert_eq!(
        pool.add(Transaction::coinbase(1, vec![]), &utxo),
        Err(MempoolError::Coinbase)
    );
    pool.add(t3.clone(), &utxo).unwrap();
    let order: Vec<_> = pool.iter().map(|(id, _)| *id).collect();
    assert_eq!(order, vec![t1.tx_id(), t3.tx_id()]);

    // a block confirms t2 instead: t1 conflicts and is dropped, t3 stays
    apply_tx(&t2, 1, &mut utxo).unwrap();
    assert_eq!(pool.remove_confirmed(std::slice::from_ref(&t2)), 1);
    assert_eq!(pool.len(), 1);

    // orphaning that block brings t2 back unless the new chain has it
    let back = pool.reinsert(&[Transaction::coinbase(1, vec![]), t2.clone()], &funded(&[a.clone(), b.clone()]).0, |_| false);
    assert_eq!(back, vec![t2.tx_id()]);
    assert!(pool.reinsert(std::slice::from_ref(&t2), &utxo, |_| true).is_empty());

    // after the reorg the other spend of g:0 is on chain; t2 is stale
    let evicted = pool.revalidate(&utxo);
    assert_eq!(evicted, vec![t2.tx_id()]);
}

#[test]
fn select_respects_size_and_order() {
    let keys: Vec<_> = (1..=4).map(key).collect();
    let (utxo, g) = funded(&keys);
    let mut pool = Mempool::new();
    for (i, k) in keys.iter().enumerate() {
        let tx = build_transaction(&[op(&g, i as u32)], &[(addr(&keys[0]), 1)], 0, std::slice::from_ref(k), &utxo).unwrap();
        pool.add(tx, &utxo).unwrap();
    }
    let one = pool.iter().next().unwrap().1.size;
    let picked = pool.select(one * 2 + 1, |_| true);
    assert_eq!(picked.len(), 2);
    let ids: Vec<_> = pool.iter().take(2).map(|(id, _)| *id).collect();
    assert_eq!(picked.iter().map(|t| t.tx_id()).collect::<Vec<_>>(), ids);
}

#[test]
fn coin_selection() {
    let a = key(1);
    let (utxo, g) = funded(&[a.clone(), a.clone()]);
    assert_eq!(select_coins(&addr(&a), 50, &utxo).unwrap().len(), 1);
    assert_eq!(select_coins(&addr(&a), 150, &utxo).unwrap().len(), 2);
    assert!(select_coins(&addr(&a), 201, &utxo).is_none());
    assert!(build_transaction(&[op(&g, 0)], &[(addr(&a), 101)], 0, &[a], &utxo).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // value is never created: every accepted sequence keeps the total at or
    // below genesis, and reverting restores the exact set
    #[test]
    fn random_spends_conserve_value(plan in proptest::collection::vec((0usize..3, 0usize..3, 1u64..60, 0u64..3), 1..12)) {
        let keys: Vec<_> = (1..=3).map(key).collect();
        let (mut utxo, _) = funded(&keys);
        let start = utxo.clone();
        let mut applied = Vec::new();
        let mut fees = 0u128;
        for (from, to, amount, fee) in plan {
            let Some(spend) = select_coins(&addr(&keys[from]), amount + fee, &utxo) else { continue };
            let tx = build_transaction(&spend, &[(addr(&keys[to]), amount)], fee, &keys, &utxo).unwrap();
            let (v, undo) = apply_tx(&tx, 1, &mut utxo).unwrap();
            fees += v.fee as u128;
            applied.push((tx, undo));
        }
        prop_assert_eq!(utxo.total() + fees, start.total());
        for (tx, undo) in applied.iter().rev() {
            revert_tx(tx, undo, &mut utxo);
        }
        prop_assert_eq!(utxo, start);
    }

    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let _ = Transaction::decode(&bytes);
    }

    #[test]
    fn encoding_round_trips(amounts in proptest::collection::vec(0u64..MAX_SUPPLY, 0..5), payload in proptest::collection::vec(any::<u8>(), 0..40)) {
        let a = key(5);
        let tx = Transaction {
            kind: TxKind::ContractCall,
            inputs: vec![TxInput { source_tx: blocklab::crypto::sha256(b"x"), source_index: 3, public_key: a.public_key().clone(), signature: a.sign(b"m") }],
            outputs: amounts.iter().map(|&amount| TxOutput { amount, recipient: addr(&a) }).collect(),
            payload,
        };
        prop_assert_eq!(Transaction::decode(&tx.encode()).unwrap(), tx);
    }
}
