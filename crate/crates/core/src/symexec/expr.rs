// SPDX-License-Identifier: Apache-2.0

//! Hash-consed symbolic bit-vector expressions.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use fnv::FnvHasher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    ZExt,
    SExt,
    Trunc,
    Neg,
    Not,
}

impl UnOp {
    pub const ALL: [UnOp; 5] = [UnOp::ZExt, UnOp::SExt, UnOp::Trunc, UnOp::Neg, UnOp::Not];

    pub fn name(self) -> &'static str {
        match self {
            UnOp::ZExt => "ZExt",
            UnOp::SExt => "SExt",
            UnOp::Trunc => "Trunc",
            UnOp::Neg => "Neg",
            UnOp::Not => "Not",
        }
    }

    pub fn from_name(s: &str) -> Option<UnOp> {
        UnOp::ALL.into_iter().find(|o| o.name() == s)
    }

    pub fn is_cast(self) -> bool {
        matches!(self, UnOp::ZExt | UnOp::SExt | UnOp::Trunc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinKind {
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
    Slt,
    Ule,
    Sle,
}

impl BinKind {
    pub const ALL: [BinKind; 17] = [
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
        BinKind::Eq,
        BinKind::Ne,
        BinKind::Ult,
        BinKind::Slt,
        BinKind::Ule,
        BinKind::Sle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinKind::Add => "Add",
            BinKind::Sub => "Sub",
            BinKind::Mul => "Mul",
            BinKind::UDiv => "UDiv",
            BinKind::SDiv => "SDiv",
            BinKind::And => "And",
            BinKind::Or => "Or",
            BinKind::Xor => "Xor",
            BinKind::Shl => "Shl",
            BinKind::LShr => "LShr",
            BinKind::AShr => "AShr",
            BinKind::Eq => "Eq",
            BinKind::Ne => "Ne",
            BinKind::Ult => "Ult",
            BinKind::Slt => "Slt",
            BinKind::Ule => "Ule",
            BinKind::Sle => "Sle",
        }
    }

    pub fn from_name(s: &str) -> Option<BinKind> {
        BinKind::ALL.into_iter().find(|o| o.name() == s)
    }

    /// Comparisons produce a single bit.
    pub fn is_compare(self) -> bool {
        matches!(
            self,
            BinKind::Eq | BinKind::Ne | BinKind::Ult | BinKind::Slt | BinKind::Ule | BinKind::Sle
        )
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinKind::Add
                | BinKind::Mul
                | BinKind::And
                | BinKind::Or
                | BinKind::Xor
                | BinKind::Eq
                | BinKind::Ne
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Const(u64),
    Sym(String),
    Unary(UnOp, SymExpr),
    Binary(BinKind, SymExpr, SymExpr),
    /// Little-endian read of `width / 8` bytes; `offset` is 64 bits wide.
    Read {
        region: String,
        offset: SymExpr,
    },
    Ite(SymExpr, SymExpr, SymExpr),
    /// Opaque result of the `seq`-th call to `callee` on the current path.
    ExtCall {
        callee: String,
        seq: u32,
    },
}

#[derive(Debug)]
pub struct Node {
    kind: ExprKind,
    width: u32,
    hash: u64,
}

/// Shared, immutable expression node. Equality is structural; the cached
/// hash makes unequal comparisons cheap.
#[derive(Clone)]
pub struct SymExpr(Arc<Node>);

impl PartialEq for SymExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash
                && self.0.width == other.0.width
                && self.0.kind == other.0.kind)
    }
}

impl Eq for SymExpr {}

impl Hash for SymExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::symgraph::expr_to_kquery(self))
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::symgraph::expr_to_kquery(self))
    }
}

pub fn mask(v: u64, w: u32) -> u64 {
    if w >= 64 {
        v
    } else {
        v & ((1u64 << w) - 1)
    }
}

/// Stable content hash: FNV-1a over a fixed little-endian encoding of the
/// tag, width, payload and child hashes.
fn content_hash(kind: &ExprKind, width: u32) -> u64 {
    let mut h = FnvHasher::default();
    let mut put = |bytes: &[u8]| h.write(bytes);
    let tag: u8 = match kind {
        ExprKind::Const(_) => 0,
        ExprKind::Sym(_) => 1,
        ExprKind::Unary(..) => 2,
        ExprKind::Binary(..) => 3,
        ExprKind::Read { .. } => 4,
        ExprKind::Ite(..) => 5,
        ExprKind::ExtCall { .. } => 6,
    };
    put(&[tag]);
    put(&width.to_le_bytes());
    match kind {
        ExprKind::Const(v) => put(&v.to_le_bytes()),
        ExprKind::Sym(name) => {
            put(&(name.len() as u64).to_le_bytes());
            put(name.as_bytes());
        }
        ExprKind::Unary(op, a) => {
            put(&[*op as u8]);
            put(&a.hash_value().to_le_bytes());
        }
        ExprKind::Binary(op, a, b) => {
            put(&[*op as u8]);
            put(&a.hash_value().to_le_bytes());
            put(&b.hash_value().to_le_bytes());
        }
        ExprKind::Read { region, offset } => {
            put(&(region.len() as u64).to_le_bytes());
            put(region.as_bytes());
            put(&offset.hash_value().to_le_bytes());
        }
        ExprKind::Ite(c, a, b) => {
            for e in [c, a, b] {
                put(&e.hash_value().to_le_bytes());
            }
        }
        ExprKind::ExtCall { callee, seq } => {
            put(&(callee.len() as u64).to_le_bytes());
            put(callee.as_bytes());
            put(&seq.to_le_bytes());
        }
    }
    h.finish()
}

impl SymExpr {
    fn make(kind: ExprKind, width: u32) -> SymExpr {
        let hash = content_hash(&kind, width);
        SymExpr(Arc::new(Node { kind, width, hash }))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    /// Stable structural hash.
    pub fn hash_value(&self) -> u64 {
        self.0.hash
    }

    /// Identity of the shared node, for memo tables.
    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(value: u64, width: u32) -> SymExpr {
        assert!((1..=64).contains(&width), "bad width {width}");
        SymExpr::make(ExprKind::Const(mask(value, width)), width)
    }

    pub fn bool(b: bool) -> SymExpr {
        SymExpr::constant(b as u64, 1)
    }

    pub fn sym(name: impl Into<String>, width: u32) -> SymExpr {
        assert!((1..=64).contains(&width), "bad width {width}");
        SymExpr::make(ExprKind::Sym(name.into()), width)
    }

    pub fn ext_call(callee: impl Into<String>, seq: u32, width: u32) -> SymExpr {
        assert!((1..=64).contains(&width), "bad width {width}");
        SymExpr::make(
            ExprKind::ExtCall {
                callee: callee.into(),
                seq,
            },
            width,
        )
    }

    pub fn try_unary(op: UnOp, a: SymExpr, width: u32) -> Result<SymExpr, String> {
        let ok = match op {
            UnOp::ZExt | UnOp::SExt => width > a.width() && width <= 64,
            UnOp::Trunc => width < a.width() && width >= 1,
            UnOp::Neg | UnOp::Not => width == a.width(),
        };
        if !ok {
            return Err(format!(
                "{} from w{} to w{width} is ill-formed",
                op.name(),
                a.width()
            ));
        }
        Ok(SymExpr::make(ExprKind::Unary(op, a), width))
    }

    pub fn unary(op: UnOp, a: SymExpr, width: u32) -> SymExpr {
        SymExpr::try_unary(op, a, width).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_binary(op: BinKind, a: SymExpr, b: SymExpr) -> Result<SymExpr, String> {
        if a.width() != b.width() {
            return Err(format!(
                "{} operands have widths w{} and w{}",
                op.name(),
                a.width(),
                b.width()
            ));
        }
        let w = if op.is_compare() { 1 } else { a.width() };
        Ok(SymExpr::make(ExprKind::Binary(op, a, b), w))
    }

    pub fn binary(op: BinKind, a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::try_binary(op, a, b).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_read(
        region: impl Into<String>,
        offset: SymExpr,
        width: u32,
    ) -> Result<SymExpr, String> {
        if offset.width() != 64 {
            return Err(format!(
                "read offset must be w64, found w{}",
                offset.width()
            ));
        }
        if width == 0 || width % 8 != 0 || width > 64 {
            return Err(format!(
                "read width w{width} is not a whole number of bytes"
            ));
        }
        Ok(SymExpr::make(
            ExprKind::Read {
                region: region.into(),
                offset,
            },
            width,
        ))
    }

    pub fn read(region: impl Into<String>, offset: SymExpr, width: u32) -> SymExpr {
        SymExpr::try_read(region, offset, width).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_ite(c: SymExpr, a: SymExpr, b: SymExpr) -> Result<SymExpr, String> {
        if c.width() != 1 {
            return Err(format!("ite guard must be w1, found w{}", c.width()));
        }
        if a.width() != b.width() {
            return Err(format!(
                "ite arms have widths w{} and w{}",
                a.width(),
                b.width()
            ));
        }
        let w = a.width();
        Ok(SymExpr::make(ExprKind::Ite(c, a, b), w))
    }

    pub fn ite(c: SymExpr, a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::try_ite(c, a, b).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn not(a: SymExpr) -> SymExpr {
        let w = a.width();
        SymExpr::unary(UnOp::Not, a, w)
    }

    pub fn and(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::binary(BinKind::And, a, b)
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.kind() {
            ExprKind::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(
            self.kind(),
            ExprKind::Const(_) | ExprKind::Sym(_) | ExprKind::ExtCall { .. }
        )
    }

    /// Direct operands in order.
    pub fn children(&self) -> Vec<&SymExpr> {
        match self.kind() {
            ExprKind::Const(_) | ExprKind::Sym(_) | ExprKind::ExtCall { .. } => vec![],
            ExprKind::Unary(_, a) => vec![a],
            ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::Read { offset, .. } => vec![offset],
            ExprKind::Ite(c, a, b) => vec![c, a, b],
        }
    }

    /// Rebuilds this node over new children (same arity and widths).
    pub fn with_children(&self, kids: Vec<SymExpr>) -> SymExpr {
        let mut it = kids.into_iter();
        let mut next = || it.next().expect("arity");
        match self.kind() {
            ExprKind::Const(_) | ExprKind::Sym(_) | ExprKind::ExtCall { .. } => self.clone(),
            ExprKind::Unary(op, _) => SymExpr::unary(*op, next(), self.width()),
            ExprKind::Binary(op, _, _) => {
                let a = next();
                SymExpr::binary(*op, a, next())
            }
            ExprKind::Read { region, .. } => SymExpr::read(region.clone(), next(), self.width()),
            ExprKind::Ite(..) => {
                let c = next();
                let a = next();
                SymExpr::ite(c, a, next())
            }
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if seen.insert(e.node_id()) {
                stack.extend(e.children());
            }
        }
        seen.len()
    }
}

/// Folding constructors used by the executor: all-constant operands are
/// evaluated immediately so guards that do not depend on inputs never fork.
pub mod fold {
    use super::*;
    use crate::symexec::eval::{eval_binary, eval_unary};

    pub fn unary(op: UnOp, a: SymExpr, width: u32) -> SymExpr {
        match a.as_const() {
            Some(v) => SymExpr::constant(eval_unary(op, v, a.width(), width), width),
            None => SymExpr::unary(op, a, width),
        }
    }

    pub fn binary(op: BinKind, a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => {
                let w = a.width();
                let out_w = if op.is_compare() { 1 } else { w };
                SymExpr::constant(eval_binary(op, x, y, w), out_w)
            }
            _ => SymExpr::binary(op, a, b),
        }
    }

    pub fn ite(c: SymExpr, a: SymExpr, b: SymExpr) -> SymExpr {
        match c.as_const() {
            Some(1) => a,
            Some(_) => b,
            None if a == b => a,
            None => SymExpr::ite(c, a, b),
        }
    }

    pub fn not(a: SymExpr) -> SymExpr {
        let w = a.width();
        unary(UnOp::Not, a, w)
    }

    pub fn and(a: SymExpr, b: SymExpr) -> SymExpr {
        binary(BinKind::And, a, b)
    }

    pub fn or(a: SymExpr, b: SymExpr) -> SymExpr {
        binary(BinKind::Or, a, b)
    }

    /// Address arithmetic: keeps offsets free of `+ 0` and `* 1` noise.
    pub fn add_offset(base: SymExpr, delta: SymExpr) -> SymExpr {
        match (base.as_const(), delta.as_const()) {
            (_, Some(0)) => base,
            (Some(0), _) => delta,
            _ => binary(BinKind::Add, base, delta),
        }
    }

    pub fn scale(index: SymExpr, stride: u64) -> SymExpr {
        if stride == 1 {
            index
        } else {
            binary(BinKind::Mul, index, SymExpr::constant(stride, 64))
        }
    }
}
