//! Opcode sets and fitness evaluation.
//!
//! Opcodes are single bytes. For a problem with `F` functions and `T`
//! terminals, bytes `0..F` are functions and `F..F + T` are terminals.

use std::fmt;
use std::str::FromStr;

/// Fitness of one genome plus the number of opcodes interpreted to get it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub opcodes: u64,
}

pub trait Problem: Sync {
    fn num_functions(&self) -> u8;
    fn num_terminals(&self) -> u8;
    fn arity(&self, op: u8) -> usize;
    fn max_arity(&self) -> usize;
    /// Lower is better. Must be a pure function of `tree`.
    fn evaluate(&self, tree: &[u8]) -> Evaluation;

    fn is_terminal(&self, op: u8) -> bool {
        op >= self.num_functions()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProblemId {
    #[default]
    Quartic,
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemId::Quartic => f.write_str("quartic"),
        }
    }
}

impl FromStr for ProblemId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quartic" => Ok(ProblemId::Quartic),
            other => Err(format!("unknown problem '{other}'")),
        }
    }
}

pub const ADD: u8 = 0;
pub const SUB: u8 = 1;
pub const MUL: u8 = 2;
pub const DIV: u8 = 3;
pub const VAR_X: u8 = 4;
/// Constant terminals follow `VAR_X` in this order.
pub const CONSTANTS: [f64; 4] = [-1.0, 0.5, 1.0, 2.0];

pub const NUM_CASES: usize = 20;

/// Division returning 1 when the denominator is (nearly) zero.
pub fn protected_div(num: f64, den: f64) -> f64 {
    if den.abs() < 1e-6 {
        1.0
    } else {
        num / den
    }
}

/// Symbolic regression of `x^4 + x^3 + x^2 + x` on 20 evenly spaced points
/// in `[-1, 1]`. Fitness is the sum of absolute errors.
#[derive(Clone, Debug)]
pub struct Quartic {
    xs: [f64; NUM_CASES],
    targets: [f64; NUM_CASES],
}

impl Quartic {
    pub fn new() -> Self {
        let mut xs = [0.0; NUM_CASES];
        let mut targets = [0.0; NUM_CASES];
        for i in 0..NUM_CASES {
            let x = -1.0 + 2.0 * i as f64 / (NUM_CASES - 1) as f64;
            xs[i] = x;
            targets[i] = x * x * x * x + x * x * x + x * x + x;
        }
        Quartic { xs, targets }
    }

    pub fn cases(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.targets.iter().copied())
    }

    /// Runs the tree on every training case at once.
    pub fn outputs(&self, tree: &[u8]) -> [f64; NUM_CASES] {
        // Prefix code read back to front: operands are pushed before their
        // operator is reached, first operand on top.
        let mut stack: Vec<[f64; NUM_CASES]> = Vec::with_capacity(tree.len() / 2 + 1);
        for &op in tree.iter().rev() {
            let v = match op {
                VAR_X => self.xs,
                ADD | SUB | MUL | DIV => {
                    let a = stack.pop().expect("malformed tree: missing operand");
                    let b = stack.pop().expect("malformed tree: missing operand");
                    let mut out = [0.0; NUM_CASES];
                    for i in 0..NUM_CASES {
                        out[i] = match op {
                            ADD => a[i] + b[i],
                            SUB => a[i] - b[i],
                            MUL => a[i] * b[i],
                            _ => protected_div(a[i], b[i]),
                        };
                    }
                    out
                }
                c => [CONSTANTS[(c - VAR_X - 1) as usize]; NUM_CASES],
            };
            stack.push(v);
        }
        assert_eq!(
            stack.len(),
            1,
            "malformed tree: {} values left",
            stack.len()
        );
        stack[0]
    }
}

impl Default for Quartic {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for Quartic {
    fn num_functions(&self) -> u8 {
        4
    }

    fn num_terminals(&self) -> u8 {
        1 + CONSTANTS.len() as u8
    }

    fn arity(&self, op: u8) -> usize {
        if op < 4 {
            2
        } else {
            0
        }
    }

    fn max_arity(&self) -> usize {
        2
    }

    fn evaluate(&self, tree: &[u8]) -> Evaluation {
        let out = self.outputs(tree);
        let err: f64 = out
            .iter()
            .zip(self.targets.iter())
            .map(|(y, t)| (y - t).abs())
            .sum();
        Evaluation {
            fitness: if err.is_finite() { err } else { f64::INFINITY },
            opcodes: (tree.len() * NUM_CASES) as u64,
        }
    }
}
