//! A counter (Minsky) machine interpreter.
//!
//! Text format, one instruction per line:
//!
//! ```text
//! # comment
//! top:  DJZ 0 done   # if r0 == 0 jump to `done`, else decrement r0
//!       INC 1
//!       DJZ 2 top    # r2 is never touched, so this is an unconditional jump
//! done: HALT
//! ```
//!
//! Registers are written `3` or `r3`. A label may share a line with an
//! instruction or stand alone, in which case it names the next instruction.
//! Each executed instruction is one step, `HALT` included; running past the
//! last instruction behaves like `HALT`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Inc(usize),
    /// Jump to the target if the register is zero, otherwise decrement it.
    Djz(usize, usize),
    Halt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    instrs: Vec<Instr>,
    registers: usize,
}

impl Program {
    pub fn new(instrs: Vec<Instr>) -> Result<Self> {
        let mut registers = 1;
        for (i, ins) in instrs.iter().enumerate() {
            match *ins {
                Instr::Inc(r) => registers = registers.max(r + 1),
                Instr::Djz(r, t) => {
                    registers = registers.max(r + 1);
                    if t > instrs.len() {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("jump target {t} out of range"),
                        });
                    }
                }
                Instr::Halt => {}
            }
        }
        Ok(Program { instrs, registers })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut labels: HashMap<String, usize> = HashMap::new();
        let mut pending: Vec<(usize, Vec<String>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut rest = line;
            while let Some((name, tail)) = rest.split_once(':') {
                let name = name.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    break;
                }
                if labels.insert(name.to_string(), pending.len()).is_some() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("duplicate label `{name}`"),
                    });
                }
                rest = tail.trim();
            }
            if !rest.is_empty() {
                pending.push((lineno + 1, rest.split_whitespace().map(str::to_string).collect()));
            }
        }
        let reg = |line: usize, tok: &str| -> Result<usize> {
            tok.strip_prefix(['r', 'R'])
                .unwrap_or(tok)
                .parse()
                .map_err(|_| Error::Parse {
                    line,
                    message: format!("bad register `{tok}`"),
                })
        };
        let instrs = pending
            .iter()
            .map(|(line, toks)| {
                let line = *line;
                let arity = |n: usize| {
                    if toks.len() == n {
                        Ok(())
                    } else {
                        Err(Error::Parse {
                            line,
                            message: format!("`{}` takes {} operand(s)", toks[0], n - 1),
                        })
                    }
                };
                match toks[0].to_ascii_uppercase().as_str() {
                    "INC" => {
                        arity(2)?;
                        Ok(Instr::Inc(reg(line, &toks[1])?))
                    }
                    "DJZ" => {
                        arity(3)?;
                        let target = *labels.get(&toks[2]).ok_or_else(|| Error::Parse {
                            line,
                            message: format!("unknown label `{}`", toks[2]),
                        })?;
                        Ok(Instr::Djz(reg(line, &toks[1])?, target))
                    }
                    "HALT" => {
                        arity(1)?;
                        Ok(Instr::Halt)
                    }
                    other => Err(Error::Parse {
                        line,
                        message: format!("unknown instruction `{other}`"),
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Program::new(instrs)
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn registers(&self) -> usize {
        self.registers
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ins) in self.instrs.iter().enumerate() {
            write!(f, "L{i}: ")?;
            match ins {
                Instr::Inc(r) => writeln!(f, "INC {r}")?,
                Instr::Djz(r, t) => writeln!(f, "DJZ {r} L{t}")?,
                Instr::Halt => writeln!(f, "HALT")?,
            }
        }
        writeln!(f, "L{}: HALT", self.instrs.len())
    }
}

/// A program together with the natural number loaded into register 0.
#[derive(Clone, Debug)]
pub struct ToyMachine {
    pub program: Arc<Program>,
    pub input: u64,
}

/// How a bounded run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Executed `HALT` at this step (1-based).
    Halts(u64),
    /// A configuration repeated at this step, so the machine never halts.
    Loops(u64),
    /// Still running after the budget, with no repeat seen.
    Unknown(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Config {
    pc: usize,
    regs: Vec<u64>,
}

impl ToyMachine {
    pub fn new(program: impl Into<Arc<Program>>, input: u64) -> Self {
        ToyMachine {
            program: program.into(),
            input,
        }
    }

    fn start(&self) -> Config {
        let mut regs = vec![0; self.program.registers];
        regs[0] = self.input;
        Config { pc: 0, regs }
    }

    /// Executes one instruction; returns true if it was `HALT`.
    fn step(&self, c: &mut Config) -> bool {
        match self.program.instrs.get(c.pc).copied().unwrap_or(Instr::Halt) {
            Instr::Halt => true,
            Instr::Inc(r) => {
                c.regs[r] = c.regs[r].saturating_add(1);
                c.pc += 1;
                false
            }
            Instr::Djz(r, t) => {
                if c.regs[r] == 0 {
                    c.pc = t;
                } else {
                    c.regs[r] -= 1;
                    c.pc += 1;
                }
                false
            }
        }
    }

    /// True iff the machine executes `HALT` within `steps` steps.
    pub fn halts_within(&self, steps: u64) -> bool {
        let mut c = self.start();
        (1..=steps).any(|_| self.step(&mut c))
    }

    /// Runs for at most `budget` steps, certifying non-termination when a
    /// configuration repeats.
    pub fn classify(&self, budget: u64) -> Outcome {
        let mut c = self.start();
        let mut seen = HashSet::new();
        for step in 1..=budget {
            if !seen.insert(c.clone()) {
                return Outcome::Loops(step);
            }
            if self.step(&mut c) {
                return Outcome::Halts(step);
            }
        }
        Outcome::Unknown(budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(src: &str, input: u64) -> ToyMachine {
        ToyMachine::new(Program::parse(src).unwrap(), input)
    }

    #[test]
    fn halt_takes_one_step() {
        let m = machine("HALT", 0);
        assert!(!m.halts_within(0));
        assert!(m.halts_within(1));
        assert_eq!(m.classify(10), Outcome::Halts(1));
    }

    #[test]
    fn self_jump_never_halts() {
        let m = machine("INC 0\nloop: DJZ 1 loop\n", 0);
        assert!(!m.halts_within(1_000_000));
        assert!(matches!(m.classify(1000), Outcome::Loops(_)));
    }

    #[test]
    fn empty_program_halts_at_first_step() {
        assert_eq!(machine("# nothing\n", 0).classify(5), Outcome::Halts(1));
    }

    #[test]
    fn countdown() {
        // n decrements, then the DJZ on zero jumps to HALT: n + 2 steps
        let src = "top: DJZ 0 end\nDJZ 1 top\nend: HALT";
        for n in 0..20 {
            let steps = if n == 0 { 2 } else { 2 * n + 2 };
            assert_eq!(machine(src, n).classify(1000), Outcome::Halts(steps));
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Program::parse("FOO 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Program::parse("INC\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Program::parse("HALT\nDJZ 0 nowhere"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Program::parse("a: HALT\na: HALT"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Program::parse("INC x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn labels_and_registers() {
        let p = Program::parse("start:\n  INC r2\n  DJZ R2 start # back\nHALT").unwrap();
        assert_eq!(p.instrs(), &[Instr::Inc(2), Instr::Djz(2, 0), Instr::Halt]);
        assert_eq!(p.registers(), 3);
    }
}
