//! One pass/fail line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use blocklab::chain::{split_chain_records, verify_encoded_blocks, ChainStore, ValidationRules, VerifyError};
use blocklab::contracts::{execute, Bytecode, ExecStatus, Instr, Storage};
use blocklab::crypto::{sha256, solve_string_puzzle};
use blocklab::ledger::build_transaction;
use common::sim::*;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sha256_vectors() {
    let cases: [(&[u8], &str); 4] = [
        (b"1", "6b86b273ff34fce19d6b804eff5a3f5747ada4eaa22f1d49c01e52ddb7875b4b"),
        (b"2", "d4735e3a265e16eee03f59718b9b5d03019c07d8b6c51f90da3a666eec13ab35"),
        (b"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
        (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
    ];
    for (msg, hex) in cases {
        assert_eq!(sha256(msg).to_hex(), hex, "{msg:?}");
    }
}

fn puzzle_six_zeros() {
    let s = solve_string_puzzle("blockchain", 6, 0, None).unwrap();
    assert_eq!((s.nonce, s.attempts), (10_730_895, 10_730_896));
    assert!(s.digest.to_hex().starts_with("000000ca1415e0"));
}

fn puzzle_seven_zeros_from_offset() {
    let s = solve_string_puzzle("blockchain", 7, 1_610_612_736, None).unwrap();
    assert_eq!((s.nonce, s.attempts), (1_700_876_653, 90_263_918));
}

fn difficulty_scaling() {
    let trials = 200;
    let means: Vec<f64> = (2..=4).map(|d| mean_attempts(d, trials)).collect();
    for (d, m) in (2..=4).zip(&means) {
        let expect = 16f64.powi(d);
        let sd = expect / (trials as f64).sqrt();
        assert!((m - expect).abs() <= 3.0 * sd, "difficulty {d}: mean {m}");
    }
    let ratio_sd = 16.0 * (2.0 / trials as f64).sqrt();
    for w in means.windows(2) {
        let r = w[1] / w[0];
        assert!((r - 16.0).abs() <= 3.0 * ratio_sd, "ratio {r}");
    }
}

fn stake_share() {
    let wins = pos_42_count();
    assert!((4050..=4350).contains(&wins), "{wins}");
}

fn tamper_evidence() {
    let payers: Vec<_> = (1..=3).map(key).collect();
    let params = pow_params(alloc(&[(&payers[0], 500), (&payers[1], 500), (&payers[2], 500)]));
    let mut store = ChainStore::with_params(params.clone()).unwrap();
    let miner = addr(&key(9));
    for h in 1..50u32 {
        let txs = if h % 3 == 0 {
            let k = &payers[(h as usize / 3) % 3];
            let (op, _) = store
                .state()
                .utxo
                .owned_by(&addr(k))
                .find(|(_, e)| !e.locked)
                .map(|(op, e)| (*op, e.clone()))
                .unwrap();
            vec![build_transaction(&[op], &[(miner, 5)], 1, std::slice::from_ref(k), &store.state().utxo).unwrap()]
        } else {
            Vec::new()
        };
        let fees = txs.len() as u64;
        extend(&mut store, txs, fees, miner);
    }
    assert_eq!(store.height(), 49);
    let rules = ValidationRules::from_params(&params);
    let tip = store.tip_hash();
    let bodies: Vec<Vec<u8>> = split_chain_records(&store.encode_file())
        .unwrap()
        .into_iter()
        .map(|r| r.body)
        .collect();
    verify_encoded_blocks(&bodies, &params, &rules, Some(tip)).unwrap();

    let total: usize = bodies.iter().map(Vec::len).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..600 {
        let mut pos = rng.gen_range(0..total);
        let block = bodies.iter().position(|b| {
            if pos < b.len() {
                true
            } else {
                pos -= b.len();
                false
            }
        });
        let block = block.unwrap();
        let mut damaged = bodies.clone();
        damaged[block][pos] ^= rng.gen_range(1..=255u8);
        match verify_encoded_blocks(&damaged, &params, &rules, Some(tip)) {
            Err(e @ (VerifyError::Broken { .. } | VerifyError::TipMismatch { .. })) => {
                assert!(e.height().unwrap() >= block as u64, "block {block} byte {pos}: {e}");
            }
            other => panic!("block {block} byte {pos}: {other:?}"),
        }
    }
}

fn two_branch_conflict_events() {
    assert_eq!(two_branch_conflict(), TWO_BRANCH_EVENTS);
}

fn fork_rules() {
    check_hard_fork();
    check_soft_fork();
}

fn random_program(rng: &mut ChaCha8Rng) -> Bytecode {
    let len = rng.gen_range(1..24u32);
    let instrs = (0..len)
        .map(|_| match rng.gen_range(0..19) {
            0 => Instr::Halt,
            1 => Instr::Push(rng.gen_range(0..8)),
            2 => Instr::Push(rng.gen()),
            3 => Instr::Pop,
            4 => Instr::Dup,
            5 => Instr::Swap,
            6 => Instr::Add,
            7 => Instr::Sub,
            8 => Instr::Mul,
            9 => Instr::Div,
            10 => Instr::Eq,
            11 => Instr::Lt,
            12 => Instr::Not,
            13 => Instr::Jmp(rng.gen_range(0..len)),
            14 => Instr::JmpIf(rng.gen_range(0..len)),
            15 => Instr::Input(rng.gen_range(0..4)),
            16 => Instr::Store,
            17 => Instr::Load,
            _ => Instr::Emit,
        })
        .collect();
    Bytecode::new(instrs).unwrap()
}

fn contracts() {
    let states = counter_on_three_nodes();
    assert_eq!(states[0].get(&0), Some(&5));
    assert!(states.iter().all(|s| *s == states[0]));

    let spin = Bytecode::new(vec![Instr::Push(0), Instr::Push(7), Instr::Store, Instr::Jmp(0)]).unwrap();
    let storage = Storage::from([(0, 3)]);
    let r = execute(&spin, &[], &storage, 5_000);
    assert_eq!(r.status, ExecStatus::OutOfGas);
    assert_eq!(r.gas_used, 5_000);
    assert!(r.storage_writes.is_empty() && r.output.is_empty());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let code = random_program(&mut rng);
        let input: Vec<u64> = (0..rng.gen_range(0..4)).map(|_| rng.gen()).collect();
        let storage: Storage = (0..rng.gen_range(0..4)).map(|_| (rng.gen_range(0..8), rng.gen())).collect();
        let gas = rng.gen_range(0..300);
        let a = execute(&code, &input, &storage, gas);
        let b = execute(&Bytecode::parse(&code.encode()).unwrap(), &input, &storage.clone(), gas);
        assert_eq!(a.encode(), b.encode());
        assert!(a.gas_used <= gas);
    }
}

fn simulator_determinism() {
    check_replay();
    check_frozen_log_hash();
}

fn main() -> ExitCode {
    let criteria: [(&str, fn()); 12] = [
        ("sha256 known answers", sha256_vectors),
        ("puzzle: 6 zeros from 0", puzzle_six_zeros),
        ("puzzle: 7 zeros from 1610612736", puzzle_seven_zeros_from_offset),
        ("difficulty scaling x16 per hex zero", difficulty_scaling),
        ("stake 42/58 selection share", stake_share),
        ("tamper evidence on a 50-block chain", tamper_evidence),
        ("two-branch conflict and reorganisation", two_branch_conflict_events),
        ("value conservation in every scenario", check_conservation),
        ("majority share drives reorgs", check_majority_reorgs),
        ("hard fork split and soft fork rejections", fork_rules),
        ("contract determinism and gas", contracts),
        ("simulator determinism and frozen log hash", simulator_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(check)).is_ok();
        let secs = t.elapsed().as_secs_f64();
        println!("{:>2} {} {name} ({secs:.2}s)", i + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
