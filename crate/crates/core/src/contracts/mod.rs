//! Gas-metered stack machine and contract accounts.

mod account;
pub mod asm;
mod bytecode;
mod vm;

pub use account::{
    decode_call_payload, derive_contract_address, encode_call_payload, ContractAccount,
    ContractError, ContractRegistry, ContractUndo, GAS_PER_FEE_UNIT,
};
pub use bytecode::{op, Bytecode, BytecodeError, Instr, MAX_STACK};
pub use vm::{execute, ExecResult, ExecStatus, Storage, TrapReason};

/// Increments storage[0] by one on each call.
pub fn counter_program() -> Bytecode {
    use Instr::*;
    Bytecode::new(vec![Push(0), Dup, Load, Push(1), Add, Store]).expect("valid program")
}
