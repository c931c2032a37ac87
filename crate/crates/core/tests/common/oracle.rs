// SPDX-License-Identifier: Apache-2.0

//! Independent concrete semantics: two's-complement arithmetic written from
//! its definition, an expression evaluator over a flattened tape, and an
//! interpreter for the integer subset of the mini-IR. Nothing here calls
//! the library's own evaluator.

use std::collections::HashMap;

use s3diff::mir::{CastKind, CheckedOp, Dialect, IrFunction, Op, Operand, Terminator};
use s3diff::symexec::{ExprKind, SymExpr, UnOp};

pub fn mask(v: u64, w: u32) -> u64 {
    if w >= 64 {
        v
    } else {
        v & ((1u64 << w) - 1)
    }
}

pub fn signed(v: u64, w: u32) -> i128 {
    let m = mask(v, w) as i128;
    if (m >> (w - 1)) & 1 == 1 {
        m - (1i128 << w)
    } else {
        m
    }
}

fn wrap(v: i128, w: u32) -> u64 {
    mask(v as u64, w)
}

/// Integer operations, named like the IR mnemonics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ar {
    Add,
    Sub,
    Mul,
    UDiv,
    SDiv,
    And,
    Or,
    Xor,
    Shl,
    LShr,
    AShr,
    Eq,
    Ne,
    Ult,
    Ule,
    Ugt,
    Uge,
    Slt,
    Sle,
    Sgt,
    Sge,
}

impl Ar {
    pub fn parse(name: &str) -> Ar {
        match name {
            "add" => Ar::Add,
            "sub" => Ar::Sub,
            "mul" => Ar::Mul,
            "udiv" => Ar::UDiv,
            "sdiv" => Ar::SDiv,
            "and" => Ar::And,
            "or" => Ar::Or,
            "xor" => Ar::Xor,
            "shl" => Ar::Shl,
            "lshr" => Ar::LShr,
            "ashr" => Ar::AShr,
            "eq" => Ar::Eq,
            "ne" => Ar::Ne,
            "ult" => Ar::Ult,
            "ule" => Ar::Ule,
            "ugt" => Ar::Ugt,
            "uge" => Ar::Uge,
            "slt" => Ar::Slt,
            "sle" => Ar::Sle,
            "sgt" => Ar::Sgt,
            "sge" => Ar::Sge,
            other => panic!("oracle: unknown operation {other}"),
        }
    }
}

/// `a op b` at width `w` . Comparisons return 0 or 1.
pub fn arith(op: Ar, a: u64, b: u64, w: u32) -> u64 {
    let (ua, ub) = (mask(a, w) as i128, mask(b, w) as i128);
    let (sa, sb) = (signed(a, w), signed(b, w));
    let ones = mask(u64::MAX, w);
    let bit = |c: bool| u64::from(c);
    match op {
        Ar::Add => wrap(ua + ub, w),
        Ar::Sub => wrap(ua - ub, w),
        Ar::Mul => wrap(ua.wrapping_mul(ub), w),
        // division is total: x/0 is all ones, signed negative x/0 is 1
        Ar::UDiv => {
            if ub == 0 {
                ones
            } else {
                wrap(ua / ub, w)
            }
        }
        Ar::SDiv => {
            if sb == 0 {
                if sa < 0 {
                    1
                } else {
                    ones
                }
            } else {
                wrap(sa / sb, w)
            }
        }
        Ar::And => wrap(ua & ub, w),
        Ar::Or => wrap(ua | ub, w),
        Ar::Xor => wrap(ua ^ ub, w),
        Ar::Shl => {
            if ub >= i128::from(w) {
                0
            } else {
                wrap(ua << ub, w)
            }
        }
        Ar::LShr => {
            if ub >= i128::from(w) {
                0
            } else {
                wrap(ua >> ub, w)
            }
        }
        Ar::AShr => {
            if ub >= i128::from(w) {
                if sa < 0 {
                    ones
                } else {
                    0
                }
            } else {
                wrap(sa >> ub, w)
            }
        }
        Ar::Eq => bit(ua == ub),
        Ar::Ne => bit(ua != ub),
        Ar::Ult => bit(ua < ub),
        Ar::Ule => bit(ua <= ub),
        Ar::Ugt => bit(ua > ub),
        Ar::Uge => bit(ua >= ub),
        Ar::Slt => bit(sa < sb),
        Ar::Sle => bit(sa <= sb),
        Ar::Sgt => bit(sa > sb),
        Ar::Sge => bit(sa >= sb),
    }
}

fn cast(kind: &str, v: u64, from: u32, to: u32) -> u64 {
    match kind {
        "zext" => mask(v, from),
        "sext" => wrap(signed(v, from), to),
        "trunc" => mask(v, to),
        other => panic!("oracle: unknown cast {other}"),
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(u64),
    Sym(usize),
    Byte(usize),
    Un(&'static str, usize, u32, u32),
    Bin(Ar, usize, usize, u32),
    Ite(usize, usize, usize),
    Read { bytes: Vec<usize> },
}

/// Flattened DAG of one or more roots, shared nodes evaluated once.
/// Variables are symbols and constant-offset memory bytes.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    roots: Vec<usize>,
    pub symbols: Vec<(String, u32)>,
    pub bytes: Vec<(String, u64)>,
}

impl Tape {
    pub fn new(roots: &[SymExpr]) -> Tape {
        let mut t = Tape::default();
        let mut seen: HashMap<SymExpr, usize> = HashMap::new();
        t.roots = roots.iter().map(|r| t.add(r, &mut seen)).collect();
        t
    }

    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn byte(&mut self, region: &str, off: u64) -> usize {
        let key = (region.to_string(), off);
        let i = match self.bytes.iter().position(|b| *b == key) {
            Some(i) => i,
            None => {
                self.bytes.push(key);
                self.bytes.len() - 1
            }
        };
        self.push(Node::Byte(i))
    }

    fn add(&mut self, e: &SymExpr, seen: &mut HashMap<SymExpr, usize>) -> usize {
        if let Some(&i) = seen.get(e) {
            return i;
        }
        let n = match e.kind() {
            ExprKind::Const(v) => Node::Const(*v),
            ExprKind::Sym(s) => {
                let key = (s.clone(), e.width());
                let i = match self.symbols.iter().position(|x| *x == key) {
                    Some(i) => i,
                    None => {
                        self.symbols.push(key);
                        self.symbols.len() - 1
                    }
                };
                Node::Sym(i)
            }
            ExprKind::Unary(op, a) => {
                let name = match op {
                    UnOp::ZExt => "zext",
                    UnOp::SExt => "sext",
                    UnOp::Trunc => "trunc",
                    UnOp::Neg => "neg",
                    UnOp::Not => "not",
                };
                let from = a.width();
                let a = self.add(a, seen);
                Node::Un(name, a, from, e.width())
            }
            ExprKind::Binary(op, a, b) => {
                let w = a.width();
                let (a, b) = (self.add(a, seen), self.add(b, seen));
                Node::Bin(Ar::parse(&op.name().to_ascii_lowercase()), a, b, w)
            }
            ExprKind::Ite(c, a, b) => {
                let (c, a, b) = (self.add(c, seen), self.add(a, seen), self.add(b, seen));
                Node::Ite(c, a, b)
            }
            ExprKind::Read { region, offset } => {
                let off = offset.as_const().expect("oracle: symbolic read offset");
                let n = (e.width() / 8).max(1);
                let bytes = (0..u64::from(n))
                    .map(|k| self.byte(region, off + k))
                    .collect();
                Node::Read { bytes }
            }
            ExprKind::ExtCall { .. } => panic!("oracle: external call results are not enumerable"),
        };
        let i = self.push(n);
        seen.insert(e.clone(), i);
        i
    }

    /// Values of all roots; `syms` and `bytes` follow the tape's tables.
    pub fn eval(&self, syms: &[u64], bytes: &[u64], out: &mut Vec<u64>) -> Vec<u64> {
        out.clear();
        for n in &self.nodes {
            let v = match n {
                Node::Const(v) => *v,
                Node::Sym(i) => mask(syms[*i], self.symbols[*i].1),
                Node::Byte(i) => bytes[*i] & 0xFF,
                Node::Un(op, a, from, to) => match *op {
                    "neg" => wrap(-(mask(out[*a], *from) as i128), *to),
                    "not" => mask(!out[*a], *to),
                    k => cast(k, out[*a], *from, *to),
                },
                Node::Bin(op, a, b, w) => arith(*op, out[*a], out[*b], *w),
                Node::Ite(c, a, b) => {
                    if out[*c] & 1 == 1 {
                        out[*a]
                    } else {
                        out[*b]
                    }
                }
                Node::Read { bytes } => bytes
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (k, &b)| acc | (out[b] << (8 * k))),
            };
            out.push(v);
        }
        self.roots.iter().map(|&r| out[r]).collect()
    }
}

/// How a concrete run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Return(Option<u64>),
    Panic(String),
}

/// Runs an integer-only function: integer parameters, `alloc` slots of
/// integer type, arithmetic, casts, checked arithmetic and branches.
pub fn run(f: &IrFunction, args: &[u64]) -> Outcome {
    let rust = f.dialect == Dialect::Rust;
    let mut env: HashMap<&str, (u64, u32)> = HashMap::new();
    let mut slots: Vec<(u64, u32)> = Vec::new();
    for (p, &a) in f.params.iter().zip(args) {
        let w = p.ty.int_width().expect("oracle: integer parameters only");
        env.insert(&p.name, (mask(a, w), w));
    }
    let get = |env: &HashMap<&str, (u64, u32)>, o: &Operand, hint: u32| -> (u64, u32) {
        match o {
            Operand::Value(n) => env[n.as_str()],
            Operand::Lit(v) => (mask(*v, hint), hint),
            Operand::Null => panic!("oracle: no pointers"),
        }
    };
    let width_of = |env: &HashMap<&str, (u64, u32)>, a: &Operand, b: &Operand| match (a, b) {
        (Operand::Value(n), _) | (_, Operand::Value(n)) => env[n.as_str()].1,
        _ => 64,
    };
    let mut block = 0usize;
    for _ in 0..10_000 {
        let b = &f.blocks[block];
        for ins in &b.instrs {
            let res_w = ins
                .result
                .as_ref()
                .and_then(|(_, t)| t.int_width())
                .unwrap_or(64);
            let v: Option<(u64, u32)> = match &ins.op {
                Op::Const { value, .. } => Some((mask(*value, res_w), res_w)),
                Op::Bin { op, lhs, rhs } => {
                    let w = width_of(&env, lhs, rhs);
                    let (x, _) = get(&env, lhs, w);
                    let (y, _) = get(&env, rhs, w);
                    let name = op.mnemonic();
                    if rust && (name == "udiv" || name == "sdiv") {
                        if y == 0 {
                            return Outcome::Panic("divzero".into());
                        }
                        if name == "sdiv" && y == mask(u64::MAX, w) && x == 1u64 << (w - 1) {
                            return Outcome::Panic("overflow".into());
                        }
                    }
                    Some((arith(Ar::parse(name), x, y, w), w))
                }
                Op::Icmp { pred, lhs, rhs } => {
                    let w = width_of(&env, lhs, rhs);
                    let (x, _) = get(&env, lhs, w);
                    let (y, _) = get(&env, rhs, w);
                    Some((arith(Ar::parse(pred.mnemonic()), x, y, w), 1))
                }
                Op::Cast { kind, to, value } => {
                    let (x, from) = get(&env, value, *to);
                    let k = match kind {
                        CastKind::ZExt => "zext",
                        CastKind::SExt => "sext",
                        CastKind::Trunc => "trunc",
                    };
                    Some((cast(k, x, from, *to), *to))
                }
                Op::Checked {
                    op,
                    signed: is_signed,
                    lhs,
                    rhs,
                } => {
                    let w = width_of(&env, lhs, rhs);
                    let (x, _) = get(&env, lhs, w);
                    let (y, _) = get(&env, rhs, w);
                    let (mx, my) = if *is_signed {
                        (signed(x, w), signed(y, w))
                    } else {
                        (x as i128, y as i128)
                    };
                    let exact = match op {
                        CheckedOp::Add => mx + my,
                        CheckedOp::Sub => mx - my,
                        CheckedOp::Mul => mx * my,
                    };
                    let fits = if *is_signed {
                        exact >= -(1i128 << (w - 1)) && exact < (1i128 << (w - 1))
                    } else {
                        exact >= 0 && exact < (1i128 << w)
                    };
                    if !fits {
                        return Outcome::Panic("overflow".into());
                    }
                    Some((wrap(exact, w), w))
                }
                Op::Alloc { ty } => {
                    slots.push((0, ty.int_width().expect("oracle: integer slots only")));
                    Some(((slots.len() - 1) as u64, 64))
                }
                Op::Load { ptr, .. } => {
                    let (s, _) = get(&env, ptr, 64);
                    Some(slots[s as usize])
                }
                Op::Store { value, ptr } => {
                    let (s, _) = get(&env, ptr, 64);
                    let w = slots[s as usize].1;
                    let (x, _) = get(&env, value, w);
                    slots[s as usize] = (mask(x, w), w);
                    None
                }
                other => panic!("oracle: unsupported instruction {}", other.mnemonic()),
            };
            if let (Some((name, _)), Some(v)) = (&ins.result, v) {
                env.insert(name, v);
            }
        }
        match &b.term {
            Terminator::Ret(None) => return Outcome::Return(None),
            Terminator::Ret(Some(o)) => {
                let w = f.ret.int_width().unwrap_or(64);
                return Outcome::Return(Some(get(&env, o, w).0));
            }
            Terminator::Jmp(l) => block = f.block_index(l).expect("label"),
            Terminator::Br {
                cond,
                then_label,
                else_label,
            } => {
                let (c, _) = get(&env, cond, 1);
                block = f
                    .block_index(if c & 1 == 1 { then_label } else { else_label })
                    .expect("label");
            }
            Terminator::Panic(code) => return Outcome::Panic(code.clone()),
        }
    }
    panic!("oracle: step limit reached in {}", f.name)
}
