use std::collections::BTreeMap;

use thiserror::Error;

use super::bytecode::{Bytecode, Instr, MAX_STACK};

pub type Storage = BTreeMap<u64, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrapReason {
    #[error("stack underflow")]
    StackUnderflow,
    #[error("stack overflow")]
    StackOverflow,
    #[error("jump target out of range")]
    BadJump,
    #[error("division by zero")]
    DivZero,
    #[error("input index out of range")]
    BadInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Ok,
    OutOfGas,
    Trap(TrapReason),
}

impl ExecStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, ExecStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub output: Vec<u64>,
    pub gas_used: u64,
    /// Final value of every key written. Empty unless the status is `Ok`.
    pub storage_writes: BTreeMap<u64, u64>,
}

impl ExecResult {
    /// Canonical bytes: status tag, reason tag, gas, outputs, writes.
    pub fn encode(&self) -> Vec<u8> {
        let (tag, reason) = match self.status {
            ExecStatus::Ok => (0u8, 0u8),
            ExecStatus::OutOfGas => (1, 0),
            ExecStatus::Trap(r) => (2, r as u8 + 1),
        };
        let mut out = vec![tag, reason];
        out.extend_from_slice(&self.gas_used.to_be_bytes());
        out.extend_from_slice(&(self.output.len() as u32).to_be_bytes());
        for w in &self.output {
            out.extend_from_slice(&w.to_be_bytes());
        }
        out.extend_from_slice(&(self.storage_writes.len() as u32).to_be_bytes());
        for (k, v) in &self.storage_writes {
            out.extend_from_slice(&k.to_be_bytes());
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }
}

fn fail(status: ExecStatus, gas_used: u64) -> ExecResult {
    ExecResult {
        status,
        output: Vec::new(),
        gas_used,
        storage_writes: BTreeMap::new(),
    }
}

/// Run `code` against a read-only view of `storage`. Gas is charged before
/// each instruction; an instruction that cannot be paid for ends the run with
/// `OutOfGas` and `gas_used == gas_limit`. Running off the end halts.
pub fn execute(code: &Bytecode, input: &[u64], storage: &Storage, gas_limit: u64) -> ExecResult {
    let prog = code.instrs();
    let mut stack: Vec<u64> = Vec::new();
    let mut writes: BTreeMap<u64, u64> = BTreeMap::new();
    let mut output = Vec::new();
    let mut gas = 0u64;
    let mut pc = 0usize;

    macro_rules! pop {
        () => {
            match stack.pop() {
                Some(v) => v,
                None => return fail(ExecStatus::Trap(TrapReason::StackUnderflow), gas),
            }
        };
    }
    macro_rules! push {
        ($v:expr) => {{
            if stack.len() >= MAX_STACK {
                return fail(ExecStatus::Trap(TrapReason::StackOverflow), gas);
            }
            stack.push($v);
        }};
    }

    while let Some(instr) = prog.get(pc) {
        let cost = instr.gas();
        if gas_limit - gas < cost {
            return fail(ExecStatus::OutOfGas, gas_limit);
        }
        gas += cost;
        pc += 1;
        match *instr {
            Instr::Halt => break,
            Instr::Push(w) => push!(w),
            Instr::Pop => {
                pop!();
            }
            Instr::Dup => {
                let v = pop!();
                push!(v);
                push!(v);
            }
            Instr::Swap => {
                let b = pop!();
                let a = pop!();
                push!(b);
                push!(a);
            }
            Instr::Add | Instr::Sub | Instr::Mul | Instr::Div | Instr::Eq | Instr::Lt => {
                let b = pop!();
                let a = pop!();
                let r = match *instr {
                    Instr::Add => a.wrapping_add(b),
                    Instr::Sub => a.wrapping_sub(b),
                    Instr::Mul => a.wrapping_mul(b),
                    Instr::Div => match a.checked_div(b) {
                        Some(q) => q,
                        None => return fail(ExecStatus::Trap(TrapReason::DivZero), gas),
                    },
                    Instr::Eq => (a == b) as u64,
                    _ => (a < b) as u64,
                };
                push!(r);
            }
            Instr::Not => {
                let v = pop!();
                push!((v == 0) as u64);
            }
            Instr::Jmp(t) | Instr::JmpIf(t) => {
                let taken = match *instr {
                    Instr::Jmp(_) => true,
                    _ => pop!() != 0,
                };
                if taken {
                    if t as usize >= prog.len() {
                        return fail(ExecStatus::Trap(TrapReason::BadJump), gas);
                    }
                    pc = t as usize;
                }
            }
            Instr::Input(i) => match input.get(i as usize) {
                Some(&w) => push!(w),
                None => return fail(ExecStatus::Trap(TrapReason::BadInput), gas),
            },
            Instr::Store => {
                let value = pop!();
                let key = pop!();
                writes.insert(key, value);
            }
            Instr::Load => {
                let key = pop!();
                let v = writes
                    .get(&key)
                    .or_else(|| storage.get(&key))
                    .copied()
                    .unwrap_or(0);
                push!(v);
            }
            Instr::Emit => {
                let v = pop!();
                output.push(v);
            }
        }
    }

    ExecResult {
        status: ExecStatus::Ok,
        output,
        gas_used: gas,
        storage_writes: writes,
    }
}
