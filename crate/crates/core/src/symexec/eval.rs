// SPDX-License-Identifier: Apache-2.0

//! Concrete two's-complement evaluation of symbolic expressions.
//!
//! Division follows the SMT-LIB convention so evaluation is total: unsigned
//! division by zero yields all ones, signed division by zero yields 1 for a
//! negative dividend and all ones otherwise. Shifts by at least the width
//! yield 0 (or the sign fill for `AShr`).

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::expr::{mask, BinKind, ExprKind, SymExpr, UnOp};

/// An input variable an expression can depend on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    Symbol(String),
    /// One byte of a symbolic memory region.
    Byte(String, u64),
    Ext(String, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("valuation has no value for {0:?}")]
    Missing(VarKey),
}

/// Concrete assignment to input variables. Values are masked on use.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Valuation(pub BTreeMap<VarKey, u64>);

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn set(&mut self, key: VarKey, value: u64) -> &mut Self {
        self.0.insert(key, value);
        self
    }

    pub fn symbol(&mut self, name: &str, value: u64) -> &mut Self {
        self.set(VarKey::Symbol(name.to_string()), value)
    }

    pub fn get(&self, key: &VarKey) -> Option<u64> {
        self.0.get(key).copied()
    }
}

pub(crate) fn to_signed(v: u64, w: u32) -> i64 {
    if w >= 64 {
        v as i64
    } else {
        ((v << (64 - w)) as i64) >> (64 - w)
    }
}

pub fn eval_unary(op: UnOp, v: u64, from: u32, to: u32) -> u64 {
    match op {
        UnOp::ZExt => mask(v, from),
        UnOp::SExt => mask(to_signed(v, from) as u64, to),
        UnOp::Trunc => mask(v, to),
        UnOp::Neg => mask(v.wrapping_neg(), to),
        UnOp::Not => mask(!v, to),
    }
}

/// Evaluates `a op b` at operand width `w`.
pub fn eval_binary(op: BinKind, a: u64, b: u64, w: u32) -> u64 {
    let a = mask(a, w);
    let b = mask(b, w);
    let ones = mask(u64::MAX, w);
    let (sa, sb) = (to_signed(a, w), to_signed(b, w));
    let r = match op {
        BinKind::Add => a.wrapping_add(b),
        BinKind::Sub => a.wrapping_sub(b),
        BinKind::Mul => a.wrapping_mul(b),
        BinKind::UDiv => {
            if b == 0 {
                ones
            } else {
                a / b
            }
        }
        BinKind::SDiv => {
            if b == 0 {
                if sa < 0 {
                    1
                } else {
                    ones
                }
            } else {
                sa.wrapping_div(sb) as u64
            }
        }
        BinKind::And => a & b,
        BinKind::Or => a | b,
        BinKind::Xor => a ^ b,
        BinKind::Shl => {
            if b >= u64::from(w) {
                0
            } else {
                a << b
            }
        }
        BinKind::LShr => {
            if b >= u64::from(w) {
                0
            } else {
                a >> b
            }
        }
        BinKind::AShr => {
            if b >= u64::from(w) {
                if sa < 0 {
                    ones
                } else {
                    0
                }
            } else {
                (sa >> b) as u64
            }
        }
        BinKind::Eq => return (a == b) as u64,
        BinKind::Ne => return (a != b) as u64,
        BinKind::Ult => return (a < b) as u64,
        BinKind::Ule => return (a <= b) as u64,
        BinKind::Slt => return (sa < sb) as u64,
        BinKind::Sle => return (sa <= sb) as u64,
    };
    mask(r, w)
}

fn lookup(val: &Valuation, key: VarKey) -> Result<u64, EvalError> {
    val.get(&key).ok_or(EvalError::Missing(key))
}

fn read_bytes(val: &Valuation, region: &str, off: u64, width: u32) -> Result<u64, EvalError> {
    let mut v = 0u64;
    for i in 0..u64::from(width / 8) {
        let b = lookup(val, VarKey::Byte(region.to_string(), off.wrapping_add(i)))?;
        v |= (b & 0xFF) << (8 * i);
    }
    Ok(v)
}

/// Evaluates `e` under `val`. Shared subexpressions are evaluated once.
pub fn eval_concrete(e: &SymExpr, val: &Valuation) -> Result<u64, EvalError> {
    let mut memo: HashMap<usize, u64> = HashMap::new();
    eval_memo(e, val, &mut memo)
}

fn eval_memo(
    e: &SymExpr,
    val: &Valuation,
    memo: &mut HashMap<usize, u64>,
) -> Result<u64, EvalError> {
    if let Some(v) = memo.get(&e.node_id()) {
        return Ok(*v);
    }
    let w = e.width();
    let v = match e.kind() {
        ExprKind::Const(c) => *c,
        ExprKind::Sym(name) => mask(lookup(val, VarKey::Symbol(name.clone()))?, w),
        ExprKind::ExtCall { callee, seq } => {
            mask(lookup(val, VarKey::Ext(callee.clone(), *seq))?, w)
        }
        ExprKind::Unary(op, a) => {
            let x = eval_memo(a, val, memo)?;
            eval_unary(*op, x, a.width(), w)
        }
        ExprKind::Binary(op, a, b) => {
            let x = eval_memo(a, val, memo)?;
            let y = eval_memo(b, val, memo)?;
            eval_binary(*op, x, y, a.width())
        }
        ExprKind::Read { region, offset } => {
            let off = eval_memo(offset, val, memo)?;
            read_bytes(val, region, off, w)?
        }
        ExprKind::Ite(c, a, b) => {
            if eval_memo(c, val, memo)? & 1 == 1 {
                eval_memo(a, val, memo)?
            } else {
                eval_memo(b, val, memo)?
            }
        }
    };
    memo.insert(e.node_id(), v);
    Ok(v)
}

/// Variables an expression depends on, with their widths. `None` when a
/// read has a symbolic offset, since it may touch any byte of its region.
pub fn collect_vars(roots: &[SymExpr]) -> Option<BTreeMap<VarKey, u32>> {
    let mut out = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    let mut stack: Vec<&SymExpr> = roots.iter().collect();
    while let Some(e) = stack.pop() {
        if !seen.insert(e.node_id()) {
            continue;
        }
        match e.kind() {
            ExprKind::Sym(n) => {
                out.insert(VarKey::Symbol(n.clone()), e.width());
            }
            ExprKind::ExtCall { callee, seq } => {
                out.insert(VarKey::Ext(callee.clone(), *seq), e.width());
            }
            ExprKind::Read { region, offset } => {
                let off = offset.as_const()?;
                for i in 0..u64::from(e.width() / 8) {
                    out.insert(VarKey::Byte(region.clone(), off.wrapping_add(i)), 8);
                }
            }
            _ => stack.extend(e.children()),
        }
    }
    Some(out)
}

#[derive(Debug, Clone)]
enum Step {
    Const(u64),
    Var(usize),
    /// Little-endian bytes, each an index into the variable vector.
    Bytes(Vec<usize>),
    Un(UnOp, usize, u32, u32),
    Bin(BinKind, usize, usize, u32),
    Ite(usize, usize, usize),
}

/// Expressions compiled to a linear program over a fixed variable order,
/// for fast repeated evaluation during enumeration.
#[derive(Debug, Clone)]
pub struct Tape {
    steps: Vec<Step>,
    roots: Vec<usize>,
    vars: Vec<(VarKey, u32)>,
}

impl Tape {
    /// Returns `None` when a read has a symbolic offset.
    pub fn compile(roots: &[SymExpr]) -> Option<Tape> {
        let vars: Vec<(VarKey, u32)> = collect_vars(roots)?.into_iter().collect();
        let index: HashMap<VarKey, usize> = vars
            .iter()
            .enumerate()
            .map(|(i, (k, _))| (k.clone(), i))
            .collect();
        let mut tape = Tape {
            steps: Vec::new(),
            roots: Vec::new(),
            vars,
        };
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for r in roots {
            let s = tape.emit(r, &index, &mut slot);
            tape.roots.push(s);
        }
        Some(tape)
    }

    fn emit(
        &mut self,
        e: &SymExpr,
        index: &HashMap<VarKey, usize>,
        slot: &mut HashMap<usize, usize>,
    ) -> usize {
        if let Some(s) = slot.get(&e.node_id()) {
            return *s;
        }
        let step = match e.kind() {
            ExprKind::Const(c) => Step::Const(*c),
            ExprKind::Sym(n) => Step::Var(index[&VarKey::Symbol(n.clone())]),
            ExprKind::ExtCall { callee, seq } => {
                Step::Var(index[&VarKey::Ext(callee.clone(), *seq)])
            }
            ExprKind::Read { region, offset } => {
                let off = offset.as_const().expect("constant offset");
                Step::Bytes(
                    (0..u64::from(e.width() / 8))
                        .map(|i| index[&VarKey::Byte(region.clone(), off.wrapping_add(i))])
                        .collect(),
                )
            }
            ExprKind::Unary(op, a) => {
                let a_s = self.emit(a, index, slot);
                Step::Un(*op, a_s, a.width(), e.width())
            }
            ExprKind::Binary(op, a, b) => {
                let a_s = self.emit(a, index, slot);
                let b_s = self.emit(b, index, slot);
                Step::Bin(*op, a_s, b_s, a.width())
            }
            ExprKind::Ite(c, a, b) => {
                let c_s = self.emit(c, index, slot);
                let a_s = self.emit(a, index, slot);
                let b_s = self.emit(b, index, slot);
                Step::Ite(c_s, a_s, b_s)
            }
        };
        self.steps.push(step);
        let s = self.steps.len() - 1;
        slot.insert(e.node_id(), s);
        s
    }

    pub fn vars(&self) -> &[(VarKey, u32)] {
        &self.vars
    }

    /// Evaluates every step; `values[i]` is the value of `vars()[i]`.
    pub fn run(&self, values: &[u64], scratch: &mut Vec<u64>) {
        scratch.clear();
        for step in &self.steps {
            let v = match step {
                Step::Const(c) => *c,
                Step::Var(i) => mask(values[*i], self.vars[*i].1),
                Step::Bytes(idx) => idx
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (k, i)| acc | ((values[*i] & 0xFF) << (8 * k))),
                Step::Un(op, a, from, to) => eval_unary(*op, scratch[*a], *from, *to),
                Step::Bin(op, a, b, w) => eval_binary(*op, scratch[*a], scratch[*b], *w),
                Step::Ite(c, a, b) => {
                    if scratch[*c] & 1 == 1 {
                        scratch[*a]
                    } else {
                        scratch[*b]
                    }
                }
            };
            scratch.push(v);
        }
    }

    pub fn root_value(&self, scratch: &[u64], i: usize) -> u64 {
        scratch[self.roots[i]]
    }
}
