//! Text form of bytecode. One instruction per line, `;` starts a comment,
//! `name:` defines a label that JMP and JMPIF may name instead of an index.
//! Numbers are decimal or `0x` hex.

use std::collections::HashMap;

use thiserror::Error;

use super::bytecode::{Bytecode, BytecodeError, Instr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic {word:?}")]
    UnknownMnemonic { line: usize, word: String },
    #[error("line {line}: {mnemonic} needs one operand")]
    Operand { line: usize, mnemonic: String },
    #[error("line {line}: bad number {text:?}")]
    Number { line: usize, text: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: label {label:?} defined twice")]
    DuplicateLabel { line: usize, label: String },
    #[error(transparent)]
    Bytecode(#[from] BytecodeError),
}

fn number<T: TryFrom<u64>>(text: &str, line: usize) -> Result<T, AsmError> {
    let err = || AsmError::Number {
        line,
        text: text.to_owned(),
    };
    let v = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).map_err(|_| err())?,
        None => text.parse::<u64>().map_err(|_| err())?,
    };
    T::try_from(v).map_err(|_| err())
}

pub fn assemble(src: &str) -> Result<Bytecode, AsmError> {
    // first pass: labels and instruction index per line
    let mut labels = HashMap::new();
    let mut lines = Vec::new();
    for (n, raw) in src.lines().enumerate() {
        let line = n + 1;
        let mut text = raw.split(';').next().unwrap_or("").trim();
        while let Some((label, rest)) = text.split_once(':') {
            let label = label.trim();
            if label.is_empty() || label.contains(char::is_whitespace) {
                break;
            }
            if labels.insert(label.to_owned(), lines.len() as u32).is_some() {
                return Err(AsmError::DuplicateLabel {
                    line,
                    label: label.to_owned(),
                });
            }
            text = rest.trim();
        }
        if !text.is_empty() {
            lines.push((line, text));
        }
    }

    let mut instrs = Vec::with_capacity(lines.len());
    for (line, text) in lines {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let word = parts[0];
        let arg = parts.get(1).copied();
        let upper = word.to_ascii_uppercase();
        let need = |arg: Option<&str>| -> Result<String, AsmError> {
            match (arg, parts.len()) {
                (Some(a), 2) => Ok(a.to_owned()),
                _ => Err(AsmError::Operand {
                    line,
                    mnemonic: upper.clone(),
                }),
            }
        };
        let target = |a: &str| -> Result<u32, AsmError> {
            if a.starts_with(|c: char| c.is_ascii_digit()) {
                number(a, line)
            } else {
                labels.get(a).copied().ok_or(AsmError::UnknownLabel {
                    line,
                    label: a.to_owned(),
                })
            }
        };
        let instr = match upper.as_str() {
            "PUSH" => Instr::Push(number(&need(arg)?, line)?),
            "JMP" => Instr::Jmp(target(&need(arg)?)?),
            "JMPIF" => Instr::JmpIf(target(&need(arg)?)?),
            "INPUT" => Instr::Input(number(&need(arg)?, line)?),
            other => {
                let i = match other {
                    "HALT" => Instr::Halt,
                    "POP" => Instr::Pop,
                    "DUP" => Instr::Dup,
                    "SWAP" => Instr::Swap,
                    "ADD" => Instr::Add,
                    "SUB" => Instr::Sub,
                    "MUL" => Instr::Mul,
                    "DIV" => Instr::Div,
                    "EQ" => Instr::Eq,
                    "LT" => Instr::Lt,
                    "NOT" => Instr::Not,
                    "STORE" => Instr::Store,
                    "LOAD" => Instr::Load,
                    "EMIT" => Instr::Emit,
                    _ => {
                        return Err(AsmError::UnknownMnemonic {
                            line,
                            word: word.to_owned(),
                        })
                    }
                };
                if parts.len() > 1 {
                    return Err(AsmError::Operand {
                        line,
                        mnemonic: upper,
                    });
                }
                i
            }
        };
        instrs.push(instr);
    }
    Ok(Bytecode::new(instrs)?)
}

/// Text that [`assemble`] turns back into the same program.
pub fn disassemble(code: &Bytecode) -> String {
    let mut out = String::new();
    for i in code.instrs() {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    out
}
