// SPDX-License-Identifier: Apache-2.0

//! Seeded random generators for functions, expressions and graphs.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use s3diff::symexec::{BinKind, SymExpr, UnOp};
use s3diff::symgraph::{Edge, SymGraph};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a generated function.
#[derive(Debug, Clone, Copy)]
pub struct FnShape {
    pub rust: bool,
    /// Width of every integer parameter and of the result.
    pub width: u32,
    pub params: usize,
    /// Adds a byte buffer input and an output buffer; requires width 8.
    pub memory: bool,
    pub max_branches: usize,
}

impl FnShape {
    /// Integer-only shapes whose inputs total at most 16 bits.
    pub fn small(rng: &mut ChaCha8Rng) -> FnShape {
        let (width, params) = *[(8, 1), (8, 1), (8, 2), (8, 2), (16, 1)]
            .choose(rng)
            .expect("nonempty");
        FnShape {
            rust: rng.gen_bool(0.5),
            width,
            params,
            memory: false,
            max_branches: 4,
        }
    }
}

const BIN_OPS: [&str; 11] = [
    "add", "sub", "mul", "udiv", "sdiv", "and", "or", "xor", "shl", "lshr", "ashr",
];
const PREDS: [&str; 10] = [
    "eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge",
];
const CHECKED: [&str; 6] = [
    "checked-add.s",
    "checked-add.u",
    "checked-sub.s",
    "checked-sub.u",
    "checked-mul.s",
    "checked-mul.u",
];

enum End {
    Returned,
    Fell(String),
}

struct FnGen<'r> {
    rng: &'r mut ChaCha8Rng,
    shape: FnShape,
    out: String,
    values: usize,
    labels: usize,
    branches: usize,
}

impl FnGen<'_> {
    fn value(&mut self) -> String {
        self.values += 1;
        format!("v{}", self.values)
    }

    fn label(&mut self) -> String {
        self.labels += 1;
        format!("b{}", self.labels)
    }

    fn line(&mut self, s: &str) {
        self.out.push_str("  ");
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn literal(&mut self, w: u32) -> String {
        let max = if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
        let v = match self.rng.gen_range(0..4) {
            0 => 0,
            1 => 1,
            2 => max,
            _ => self.rng.gen_range(0..=max),
        };
        v.to_string()
    }

    fn operand(&mut self, scope: &[String]) -> String {
        if self.rng.gen_bool(0.2) {
            self.literal(self.shape.width)
        } else {
            scope
                .choose(self.rng)
                .expect("scope is never empty")
                .clone()
        }
    }

    fn statement(&mut self, scope: &mut Vec<String>) {
        let w = self.shape.width;
        let x = scope.choose(self.rng).expect("scope").clone();
        let y = self.operand(scope);
        let r = self.value();
        match self.rng.gen_range(0..10) {
            0..=3 => {
                let op = BIN_OPS.choose(self.rng).expect("ops");
                self.line(&format!("{r} = {op} {x}, {y}"));
            }
            4 if self.shape.rust => {
                let op = CHECKED.choose(self.rng).expect("ops");
                self.line(&format!("{r} = {op} {x}, {y}"));
            }
            4 | 5 => {
                // widen, combine, narrow back
                let ext = if self.rng.gen_bool(0.5) {
                    "zext"
                } else {
                    "sext"
                };
                let (a, b, c) = (self.value(), self.value(), self.value());
                let op = ["add", "mul", "sub", "lshr", "and"]
                    .choose(self.rng)
                    .expect("ops");
                let wide = 2 * w;
                self.line(&format!("{a} = {ext} i{wide} {x}"));
                let z = scope.choose(self.rng).expect("scope").clone();
                self.line(&format!("{b} = zext i{wide} {z}"));
                self.line(&format!("{c} = {op} {a}, {b}"));
                self.line(&format!("{r} = trunc i{w} {c}"));
            }
            6 => {
                let p = PREDS.choose(self.rng).expect("preds");
                let c = self.value();
                self.line(&format!("{c} = icmp {p} {x}, {y}"));
                self.line(&format!("{r} = zext i{w} {c}"));
            }
            7 if self.shape.memory => {
                let (p, k) = (self.value(), self.rng.gen_range(0..4));
                if self.shape.rust {
                    self.line(&format!("{p} = bounds-checked-index s, {k}"));
                } else {
                    self.line(&format!("{p} = index-addr s, {k}"));
                }
                self.line(&format!("{r} = load i8 {p}"));
            }
            8 if self.shape.memory => {
                let (p, k) = (self.value(), self.rng.gen_range(0..3));
                self.line(&format!("{p} = index-addr o, {k}"));
                self.line(&format!("store {x}, {p}"));
                return;
            }
            _ => {
                let c = self.literal(w);
                self.line(&format!("{r} = const i{w} {c}"));
            }
        }
        scope.push(r);
    }

    fn region(&mut self, scope: &mut Vec<String>, nested: bool) -> End {
        loop {
            for _ in 0..self.rng.gen_range(1..4) {
                self.statement(scope);
            }
            let r = self.rng.gen_range(0..10);
            if r < 4 && self.branches < self.shape.max_branches {
                self.branches += 1;
                let w = self.shape.width;
                let x = scope.choose(self.rng).expect("scope").clone();
                let y = self.operand(scope);
                let p = PREDS.choose(self.rng).expect("preds");
                let (c, lt, lf, lj) = (self.value(), self.label(), self.label(), self.label());
                self.line(&format!("{c} = icmp {p} {x}, {y}"));
                self.line(&format!("br {c}, {lt}, {lf}"));
                let mut joined = false;
                for l in [&lt, &lf] {
                    let _ = writeln!(self.out, "{l}:");
                    let mut inner = scope.clone();
                    if let End::Fell(v) = self.region(&mut inner, true) {
                        self.line(&format!("store {v}, acc"));
                        self.line(&format!("jmp {lj}"));
                        joined = true;
                    }
                }
                if !joined {
                    return End::Returned;
                }
                let _ = writeln!(self.out, "{lj}:");
                let t = self.value();
                self.line(&format!("{t} = load i{w} acc"));
                scope.push(t);
                continue;
            }
            if nested && r < 7 {
                return End::Fell(scope.choose(self.rng).expect("scope").clone());
            }
            if self.shape.rust && r == 9 {
                self.line("panic explicit");
            } else {
                let v = scope.choose(self.rng).expect("scope").clone();
                self.line(&format!("ret {v}"));
            }
            return End::Returned;
        }
    }
}

/// Text of a random, valid, loop-free function named `name`.
pub fn function_text(rng: &mut ChaCha8Rng, name: &str, shape: FnShape) -> String {
    let w = shape.width;
    let mut params: Vec<String> = (0..shape.params).map(|i| format!("p{i}: i{w}")).collect();
    if shape.memory {
        params.push(if shape.rust {
            "s: str".into()
        } else {
            "s: *i8".into()
        });
        params.push("out o: *i8".into());
    }
    let dialect = if shape.rust { "rust" } else { "c" };
    let mut g = FnGen {
        rng,
        shape,
        out: String::new(),
        values: 0,
        labels: 0,
        branches: 0,
    };
    let _ = writeln!(
        g.out,
        "fn {dialect} {name}({}) -> i{w} {{",
        params.join(", ")
    );
    g.out.push_str("entry:\n");
    g.line(&format!("acc = alloc i{w}"));
    g.line("store 0, acc");
    let mut scope: Vec<String> = (0..shape.params).map(|i| format!("p{i}")).collect();
    g.region(&mut scope, false);
    g.out.push_str("}\n");
    g.out
}

const EXPR_WIDTHS: [u32; 4] = [1, 8, 16, 32];

/// Random expression of width `w` over symbols `x` and (optionally) `y`,
/// both 8 bits wide.
pub fn expr(rng: &mut ChaCha8Rng, w: u32, depth: u32, two_symbols: bool) -> SymExpr {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, w, two_symbols);
    }
    let d = depth - 1;
    let arith = [
        BinKind::Add,
        BinKind::Sub,
        BinKind::Mul,
        BinKind::UDiv,
        BinKind::SDiv,
        BinKind::And,
        BinKind::Or,
        BinKind::Xor,
        BinKind::Shl,
        BinKind::LShr,
        BinKind::AShr,
    ];
    let cmp = [
        BinKind::Eq,
        BinKind::Ne,
        BinKind::Ult,
        BinKind::Slt,
        BinKind::Ule,
        BinKind::Sle,
    ];
    match rng.gen_range(0..10) {
        0..=2 => {
            let op = *arith.choose(rng).expect("ops");
            SymExpr::binary(
                op,
                expr(rng, w, d, two_symbols),
                expr(rng, w, d, two_symbols),
            )
        }
        3 if w == 1 => {
            let op = *cmp.choose(rng).expect("ops");
            let ow = *[8, 16, 32].choose(rng).expect("widths");
            SymExpr::binary(
                op,
                expr(rng, ow, d, two_symbols),
                expr(rng, ow, d, two_symbols),
            )
        }
        3 | 4 => {
            let op = if rng.gen_bool(0.5) {
                UnOp::Neg
            } else {
                UnOp::Not
            };
            SymExpr::unary(op, expr(rng, w, d, two_symbols), w)
        }
        5 | 6 => {
            let smaller: Vec<u32> = EXPR_WIDTHS.iter().copied().filter(|&x| x < w).collect();
            match smaller.choose(rng) {
                Some(&from) => {
                    let op = if rng.gen_bool(0.5) {
                        UnOp::ZExt
                    } else {
                        UnOp::SExt
                    };
                    SymExpr::unary(op, expr(rng, from, d, two_symbols), w)
                }
                None => leaf(rng, w, two_symbols),
            }
        }
        7 => {
            let larger: Vec<u32> = EXPR_WIDTHS.iter().copied().filter(|&x| x > w).collect();
            match larger.choose(rng) {
                Some(&from) => SymExpr::unary(UnOp::Trunc, expr(rng, from, d, two_symbols), w),
                None => leaf(rng, w, two_symbols),
            }
        }
        8 => SymExpr::ite(
            expr(rng, 1, d, two_symbols),
            expr(rng, w, d, two_symbols),
            expr(rng, w, d, two_symbols),
        ),
        _ => {
            let op = *cmp.choose(rng).expect("ops");
            let c = SymExpr::binary(
                op,
                expr(rng, 8, d, two_symbols),
                expr(rng, 8, d, two_symbols),
            );
            if w == 1 {
                c
            } else {
                SymExpr::unary(UnOp::ZExt, c, w)
            }
        }
    }
}

fn leaf(rng: &mut ChaCha8Rng, w: u32, two_symbols: bool) -> SymExpr {
    let name = if two_symbols && rng.gen_bool(0.5) {
        "y"
    } else {
        "x"
    };
    match (w, rng.gen_range(0..4)) {
        (8, 0..=1) => SymExpr::sym(name, 8),
        (16 | 32, 0) => SymExpr::unary(UnOp::ZExt, SymExpr::sym(name, 8), w),
        (16 | 32, 1) => SymExpr::unary(UnOp::SExt, SymExpr::sym(name, 8), w),
        (1, 0) => SymExpr::unary(UnOp::Trunc, SymExpr::sym(name, 8), 1),
        _ => {
            let max = if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
            let v = match rng.gen_range(0..5) {
                0 => 0,
                1 => 1,
                2 => max,
                3 => 1u64 << (w - 1),
                _ => rng.gen_range(0..=max),
            };
            SymExpr::constant(v, w)
        }
    }
}

/// Random labeled multigraph with `1..=max_nodes` nodes over a three-letter
/// alphabet; edges point from higher to lower ids.
pub fn graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> SymGraph {
    let n = rng.gen_range(1..=max_nodes);
    let labels: Vec<String> = (0..n)
        .map(|_| ["a", "b", "c"].choose(rng).expect("labels").to_string())
        .collect();
    let mut edges = Vec::new();
    for parent in 1..n {
        for child in 0..parent {
            if rng.gen_bool(0.35) {
                edges.push(Edge {
                    parent,
                    child,
                    index: rng.gen_range(0..2),
                });
            }
        }
    }
    let roots = (0..n)
        .filter(|&i| !edges.iter().any(|e| e.child == i))
        .collect();
    SymGraph {
        labels,
        edges,
        roots,
    }
}
