use std::fmt;

use thiserror::Error;

/// Execution stack depth limit; pushing past it traps.
pub const MAX_STACK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instr {
    Halt,
    Push(u64),
    Pop,
    Dup,
    Swap,
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Lt,
    Not,
    Jmp(u32),
    JmpIf(u32),
    Input(u32),
    Store,
    Load,
    Emit,
}

pub mod op {
    pub const HALT: u8 = 0x00;
    pub const PUSH: u8 = 0x01;
    pub const POP: u8 = 0x02;
    pub const DUP: u8 = 0x03;
    pub const SWAP: u8 = 0x04;
    pub const ADD: u8 = 0x10;
    pub const SUB: u8 = 0x11;
    pub const MUL: u8 = 0x12;
    pub const DIV: u8 = 0x13;
    pub const EQ: u8 = 0x14;
    pub const LT: u8 = 0x15;
    pub const NOT: u8 = 0x16;
    pub const JMP: u8 = 0x20;
    pub const JMPIF: u8 = 0x21;
    pub const INPUT: u8 = 0x30;
    pub const STORE: u8 = 0x40;
    pub const LOAD: u8 = 0x41;
    pub const EMIT: u8 = 0x50;

    /// The complete opcode set. Nothing here reaches outside the calling
    /// contract's own storage.
    pub const ALL: [u8; 18] = [
        HALT, PUSH, POP, DUP, SWAP, ADD, SUB, MUL, DIV, EQ, LT, NOT, JMP, JMPIF, INPUT, STORE,
        LOAD, EMIT,
    ];
}

impl Instr {
    pub fn opcode(&self) -> u8 {
        use Instr::*;
        match self {
            Halt => op::HALT,
            Push(_) => op::PUSH,
            Pop => op::POP,
            Dup => op::DUP,
            Swap => op::SWAP,
            Add => op::ADD,
            Sub => op::SUB,
            Mul => op::MUL,
            Div => op::DIV,
            Eq => op::EQ,
            Lt => op::LT,
            Not => op::NOT,
            Jmp(_) => op::JMP,
            JmpIf(_) => op::JMPIF,
            Input(_) => op::INPUT,
            Store => op::STORE,
            Load => op::LOAD,
            Emit => op::EMIT,
        }
    }

    pub fn gas(&self) -> u64 {
        match self {
            Instr::Store | Instr::Load => 3,
            _ => 1,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        use Instr::*;
        match self {
            Halt => "HALT",
            Push(_) => "PUSH",
            Pop => "POP",
            Dup => "DUP",
            Swap => "SWAP",
            Add => "ADD",
            Sub => "SUB",
            Mul => "MUL",
            Div => "DIV",
            Eq => "EQ",
            Lt => "LT",
            Not => "NOT",
            Jmp(_) => "JMP",
            JmpIf(_) => "JMPIF",
            Input(_) => "INPUT",
            Store => "STORE",
            Load => "LOAD",
            Emit => "EMIT",
        }
    }

    fn encoded_len(&self) -> usize {
        match self {
            Instr::Push(_) => 9,
            Instr::Jmp(_) | Instr::JmpIf(_) | Instr::Input(_) => 5,
            _ => 1,
        }
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Push(w) => write!(f, "PUSH {w}"),
            Instr::Jmp(t) | Instr::JmpIf(t) | Instr::Input(t) => write!(f, "{} {t}", self.mnemonic()),
            _ => f.write_str(self.mnemonic()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BytecodeError {
    #[error("empty program")]
    Empty,
    #[error("unknown opcode {opcode:#04x} at byte {offset}")]
    UnknownOpcode { opcode: u8, offset: usize },
    #[error("truncated operand at byte {offset}")]
    Truncated { offset: usize },
    #[error("instruction {at} jumps to {target}, program has {len} instructions")]
    JumpOutOfRange { at: usize, target: u32, len: usize },
}

/// A parsed program. Jump operands are instruction indices and are checked
/// against the program length at parse time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bytecode {
    instrs: Vec<Instr>,
}

impl Bytecode {
    pub fn new(instrs: Vec<Instr>) -> Result<Self, BytecodeError> {
        if instrs.is_empty() {
            return Err(BytecodeError::Empty);
        }
        let len = instrs.len();
        for (at, i) in instrs.iter().enumerate() {
            if let Instr::Jmp(t) | Instr::JmpIf(t) = i {
                if *t as usize >= len {
                    return Err(BytecodeError::JumpOutOfRange { at, target: *t, len });
                }
            }
        }
        Ok(Self { instrs })
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.instrs.iter().map(Instr::encoded_len).sum());
        for i in &self.instrs {
            out.push(i.opcode());
            match i {
                Instr::Push(w) => out.extend_from_slice(&w.to_be_bytes()),
                Instr::Jmp(t) | Instr::JmpIf(t) | Instr::Input(t) => {
                    out.extend_from_slice(&t.to_be_bytes())
                }
                _ => {}
            }
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, BytecodeError> {
        let mut instrs = Vec::new();
        let mut pos = 0;
        let operand = |pos: usize, n: usize| -> Result<&[u8], BytecodeError> {
            bytes
                .get(pos + 1..pos + 1 + n)
                .ok_or(BytecodeError::Truncated { offset: pos })
        };
        while pos < bytes.len() {
            let opcode = bytes[pos];
            let instr = match opcode {
                op::HALT => Instr::Halt,
                op::PUSH => Instr::Push(u64::from_be_bytes(operand(pos, 8)?.try_into().unwrap())),
                op::POP => Instr::Pop,
                op::DUP => Instr::Dup,
                op::SWAP => Instr::Swap,
                op::ADD => Instr::Add,
                op::SUB => Instr::Sub,
                op::MUL => Instr::Mul,
                op::DIV => Instr::Div,
                op::EQ => Instr::Eq,
                op::LT => Instr::Lt,
                op::NOT => Instr::Not,
                op::JMP | op::JMPIF | op::INPUT => {
                    let v = u32::from_be_bytes(operand(pos, 4)?.try_into().unwrap());
                    match opcode {
                        op::JMP => Instr::Jmp(v),
                        op::JMPIF => Instr::JmpIf(v),
                        _ => Instr::Input(v),
                    }
                }
                op::STORE => Instr::Store,
                op::LOAD => Instr::Load,
                op::EMIT => Instr::Emit,
                _ => return Err(BytecodeError::UnknownOpcode { opcode, offset: pos }),
            };
            pos += instr.encoded_len();
            instrs.push(instr);
        }
        Self::new(instrs)
    }
}

impl fmt::Display for Bytecode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, i) in self.instrs.iter().enumerate() {
            writeln!(f, "{n:>4}  {i}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let code = Bytecode::new(vec![Instr::Push(2), Instr::Jmp(0), Instr::Halt]).unwrap();
        let bytes = code.encode();
        assert_eq!(bytes, [1, 0, 0, 0, 0, 0, 0, 0, 2, 0x20, 0, 0, 0, 0, 0]);
        assert_eq!(Bytecode::parse(&bytes).unwrap(), code);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(Bytecode::parse(&[]), Err(BytecodeError::Empty));
        assert_eq!(
            Bytecode::parse(&[0x99]),
            Err(BytecodeError::UnknownOpcode { opcode: 0x99, offset: 0 })
        );
        assert_eq!(Bytecode::parse(&[0x01, 0, 0]), Err(BytecodeError::Truncated { offset: 0 }));
        assert!(matches!(
            Bytecode::parse(&[0x20, 0, 0, 0, 1]),
            Err(BytecodeError::JumpOutOfRange { .. })
        ));
    }
}
