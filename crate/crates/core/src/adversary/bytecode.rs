//! A small stack language for total decision procedures on bit strings.
//!
//! One instruction per line, `#` starts a comment. Values are `i64` with
//! wrapping arithmetic.
//!
//! | op            | effect                                                  |
//! |---------------|---------------------------------------------------------|
//! | `PUSH k`      | push the literal `k`                                    |
//! | `LEN`         | push the input length                                   |
//! | `BIT`         | pop `i`, push input bit `i` (0 when out of range)       |
//! | `INDEX`       | push the iteration number of the innermost `REPEAT`     |
//! | `ADD` `SUB` `MUL` `DIV` `MOD` | pop `b`, pop `a`, push `a op b` (`/ 0` and `% 0` give 0) |
//! | `EQ` `LT` `GT` `AND` `OR`     | pop `b`, pop `a`, push 0 or 1             |
//! | `NOT`         | pop `a`, push `[a == 0]`                                |
//! | `DUP` `DROP` `SWAP` `OVER` | usual stack shuffles                       |
//! | `LOAD r` `STORE r` | registers `0..8`, initially 0                      |
//! | `REPEAT` ... `END` | pop `c`, run the body `clamp(c, 0, 65536)` times   |
//!
//! Popping an empty stack yields 0. The result is 1 iff the final top of
//! stack is non-zero (an empty stack gives 0). With no jumps and loop counts
//! fixed on entry, every program terminates on every input.

use std::fmt;

use crate::error::{Error, Result};

pub const REGISTERS: usize = 8;
pub const LOOP_CAP: i64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Push(i64),
    Len,
    Bit,
    Index,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Lt,
    Gt,
    And,
    Or,
    Not,
    Dup,
    Drop,
    Swap,
    Over,
    Load(usize),
    Store(usize),
    Repeat(Vec<Op>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bytecode {
    ops: Vec<Op>,
    source: String,
}

impl Bytecode {
    pub fn parse(text: &str) -> Result<Self> {
        // stack of open blocks: (line of REPEAT, ops so far)
        let mut blocks: Vec<(usize, Vec<Op>)> = vec![(0, Vec::new())];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let code = raw.split('#').next().unwrap_or("").trim();
            if code.is_empty() {
                continue;
            }
            let toks: Vec<&str> = code.split_whitespace().collect();
            let err = |message: String| Error::Parse { line, message };
            let operand = || -> Result<&str> {
                match toks.as_slice() {
                    [_, x] => Ok(*x),
                    _ => Err(err(format!("`{}` takes one operand", toks[0]))),
                }
            };
            let register = || -> Result<usize> {
                let r: usize = operand()?.parse().map_err(|_| err("bad register".into()))?;
                if r >= REGISTERS {
                    return Err(err(format!("register {r} out of range")));
                }
                Ok(r)
            };
            let op = toks[0].to_ascii_uppercase();
            if !matches!(op.as_str(), "PUSH" | "LOAD" | "STORE") && toks.len() != 1 {
                return Err(err(format!("`{op}` takes no operand")));
            }
            let op = match op.as_str() {
                "PUSH" => Op::Push(operand()?.parse().map_err(|_| err("bad literal".into()))?),
                "LEN" => Op::Len,
                "BIT" => Op::Bit,
                "INDEX" => Op::Index,
                "ADD" => Op::Add,
                "SUB" => Op::Sub,
                "MUL" => Op::Mul,
                "DIV" => Op::Div,
                "MOD" => Op::Mod,
                "EQ" => Op::Eq,
                "LT" => Op::Lt,
                "GT" => Op::Gt,
                "AND" => Op::And,
                "OR" => Op::Or,
                "NOT" => Op::Not,
                "DUP" => Op::Dup,
                "DROP" => Op::Drop,
                "SWAP" => Op::Swap,
                "OVER" => Op::Over,
                "LOAD" => Op::Load(register()?),
                "STORE" => Op::Store(register()?),
                "REPEAT" => {
                    blocks.push((line, Vec::new()));
                    continue;
                }
                "END" => {
                    if blocks.len() == 1 {
                        return Err(err("END without REPEAT".into()));
                    }
                    let (_, body) = blocks.pop().expect("checked above");
                    Op::Repeat(body)
                }
                other => return Err(err(format!("unknown op `{other}`"))),
            };
            blocks.last_mut().expect("root block").1.push(op);
        }
        if blocks.len() > 1 {
            let (line, _) = blocks.last().expect("non-empty");
            return Err(Error::Parse {
                line: *line,
                message: "REPEAT without END".into(),
            });
        }
        Ok(Bytecode {
            ops: blocks.pop().expect("root block").1,
            source: text.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, input: &[bool]) -> bool {
        let mut vm = Vm {
            input,
            stack: Vec::with_capacity(16),
            regs: [0; REGISTERS],
            loops: Vec::new(),
        };
        vm.run(&self.ops);
        vm.stack.last().is_some_and(|&v| v != 0)
    }
}

impl fmt::Display for Bytecode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

struct Vm<'a> {
    input: &'a [bool],
    stack: Vec<i64>,
    regs: [i64; REGISTERS],
    loops: Vec<i64>,
}

impl Vm<'_> {
    fn pop(&mut self) -> i64 {
        self.stack.pop().unwrap_or(0)
    }

    fn binary(&mut self, f: impl Fn(i64, i64) -> i64) {
        let b = self.pop();
        let a = self.pop();
        self.stack.push(f(a, b));
    }

    fn run(&mut self, ops: &[Op]) {
        for op in ops {
            match op {
                Op::Push(k) => self.stack.push(*k),
                Op::Len => self.stack.push(self.input.len() as i64),
                Op::Bit => {
                    let i = self.pop();
                    let bit = usize::try_from(i).ok().and_then(|i| self.input.get(i)).copied().unwrap_or(false);
                    self.stack.push(i64::from(bit));
                }
                Op::Index => self.stack.push(self.loops.last().copied().unwrap_or(0)),
                Op::Add => self.binary(i64::wrapping_add),
                Op::Sub => self.binary(i64::wrapping_sub),
                Op::Mul => self.binary(i64::wrapping_mul),
                Op::Div => self.binary(|a, b| if b == 0 { 0 } else { a.wrapping_div(b) }),
                Op::Mod => self.binary(|a, b| if b == 0 { 0 } else { a.wrapping_rem(b) }),
                Op::Eq => self.binary(|a, b| i64::from(a == b)),
                Op::Lt => self.binary(|a, b| i64::from(a < b)),
                Op::Gt => self.binary(|a, b| i64::from(a > b)),
                Op::And => self.binary(|a, b| i64::from(a != 0 && b != 0)),
                Op::Or => self.binary(|a, b| i64::from(a != 0 || b != 0)),
                Op::Not => {
                    let a = self.pop();
                    self.stack.push(i64::from(a == 0));
                }
                Op::Dup => {
                    let a = self.pop();
                    self.stack.extend([a, a]);
                }
                Op::Drop => {
                    self.pop();
                }
                Op::Swap => {
                    let b = self.pop();
                    let a = self.pop();
                    self.stack.extend([b, a]);
                }
                Op::Over => {
                    let b = self.pop();
                    let a = self.pop();
                    self.stack.extend([a, b, a]);
                }
                Op::Load(r) => self.stack.push(self.regs[*r]),
                Op::Store(r) => self.regs[*r] = self.pop(),
                Op::Repeat(body) => {
                    let count = self.pop().clamp(0, LOOP_CAP);
                    for i in 0..count {
                        self.loops.push(i);
                        self.run(body);
                        self.loops.pop();
                    }
                }
            }
        }
    }
}
