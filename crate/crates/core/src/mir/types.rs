// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Width of an address in bytes.
pub const ADDRESS_BYTES: u64 = 8;
/// Byte size of a string-slice header: data address + length.
pub const SLICE_BYTES: u64 = 16;
/// Byte size of a byte-vector header: data address + length + capacity.
pub const VECTOR_BYTES: u64 = 24;

/// Integer widths accepted by the IR.
pub const INT_WIDTHS: [u32; 5] = [1, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    C,
    Rust,
}

impl Dialect {
    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::C => "c",
            Dialect::Rust => "rust",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IrType {
    Int(u32),
    Address(Box<IrType>),
    /// Named record; the field list lives in the module's record table.
    Record(String),
    Array(Box<IrType>, u64),
    StrSlice,
    ByteVec,
    Optional(Box<IrType>),
    Unit,
}

impl IrType {
    pub fn ptr(inner: IrType) -> IrType {
        IrType::Address(Box::new(inner))
    }

    pub fn opt(inner: IrType) -> IrType {
        IrType::Optional(Box::new(inner))
    }

    pub fn int_width(&self) -> Option<u32> {
        match self {
            IrType::Int(w) => Some(*w),
            _ => None,
        }
    }

    /// Types whose runtime value is a single address: plain addresses, slice
    /// and vector handles, and optionals around either.
    pub fn is_pointer_like(&self) -> bool {
        match self {
            IrType::Address(_) | IrType::StrSlice | IrType::ByteVec => true,
            IrType::Optional(inner) => inner.is_pointer_like(),
            _ => false,
        }
    }

    /// Strips any number of optional wrappers.
    pub fn unwrap_optional(&self) -> &IrType {
        match self {
            IrType::Optional(inner) => inner.unwrap_optional(),
            other => other,
        }
    }

    pub fn optional_allowed(inner: &IrType) -> bool {
        matches!(
            inner,
            IrType::Address(_) | IrType::StrSlice | IrType::ByteVec
        )
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrType::Int(w) => write!(f, "i{w}"),
            IrType::Address(inner) => write!(f, "*{inner}"),
            IrType::Record(name) => f.write_str(name),
            IrType::Array(elem, n) => write!(f, "[{elem}; {n}]"),
            IrType::StrSlice => f.write_str("str"),
            IrType::ByteVec => f.write_str("vec"),
            IrType::Optional(inner) => write!(f, "opt<{inner}>"),
            IrType::Unit => f.write_str("unit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDef {
    pub name: String,
    pub fields: Vec<(String, IrType)>,
}

impl RecordDef {
    pub fn field(&self, name: &str) -> Option<(usize, &IrType)> {
        self.fields
            .iter()
            .enumerate()
            .find(|(_, (n, _))| n == name)
            .map(|(i, (_, t))| (i, t))
    }
}

/// Record definitions shared by every function of a module.
pub type RecordTable = BTreeMap<String, RecordDef>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: IrType,
    pub out: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
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
}

impl BinOp {
    pub const ALL: [BinOp; 11] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::UDiv,
        BinOp::SDiv,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::LShr,
        BinOp::AShr,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::UDiv => "udiv",
            BinOp::SDiv => "sdiv",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::LShr => "lshr",
            BinOp::AShr => "ashr",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pred {
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

impl Pred {
    pub const ALL: [Pred; 10] = [
        Pred::Eq,
        Pred::Ne,
        Pred::Ult,
        Pred::Ule,
        Pred::Ugt,
        Pred::Uge,
        Pred::Slt,
        Pred::Sle,
        Pred::Sgt,
        Pred::Sge,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Pred::Eq => "eq",
            Pred::Ne => "ne",
            Pred::Ult => "ult",
            Pred::Ule => "ule",
            Pred::Ugt => "ugt",
            Pred::Uge => "uge",
            Pred::Slt => "slt",
            Pred::Sle => "sle",
            Pred::Sgt => "sgt",
            Pred::Sge => "sge",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Pred> {
        Pred::ALL.into_iter().find(|p| p.mnemonic() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CastKind {
    ZExt,
    SExt,
    Trunc,
}

impl CastKind {
    pub fn mnemonic(self) -> &'static str {
        match self {
            CastKind::ZExt => "zext",
            CastKind::SExt => "sext",
            CastKind::Trunc => "trunc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckedOp {
    Add,
    Sub,
    Mul,
}

impl CheckedOp {
    pub fn mnemonic(self, signed: bool) -> &'static str {
        match (self, signed) {
            (CheckedOp::Add, false) => "checked-add.u",
            (CheckedOp::Add, true) => "checked-add.s",
            (CheckedOp::Sub, false) => "checked-sub.u",
            (CheckedOp::Sub, true) => "checked-sub.s",
            (CheckedOp::Mul, false) => "checked-mul.u",
            (CheckedOp::Mul, true) => "checked-mul.s",
        }
    }

    pub fn bin_op(self) -> BinOp {
        match self {
            CheckedOp::Add => BinOp::Add,
            CheckedOp::Sub => BinOp::Sub,
            CheckedOp::Mul => BinOp::Mul,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Value(String),
    /// Integer literal, stored masked to the width it is used at.
    Lit(u64),
    Null,
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Value(name) => f.write_str(name),
            Operand::Lit(v) => write!(f, "{v}"),
            Operand::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Const {
        ty: IrType,
        value: u64,
    },
    Bin {
        op: BinOp,
        lhs: Operand,
        rhs: Operand,
    },
    Icmp {
        pred: Pred,
        lhs: Operand,
        rhs: Operand,
    },
    Cast {
        kind: CastKind,
        to: u32,
        value: Operand,
    },
    Alloc {
        ty: IrType,
    },
    Load {
        ty: IrType,
        ptr: Operand,
    },
    Store {
        value: Operand,
        ptr: Operand,
    },
    FieldAddr {
        base: Operand,
        field: String,
    },
    IndexAddr {
        base: Operand,
        index: Operand,
    },
    Call {
        ret: IrType,
        callee: String,
        args: Vec<Operand>,
    },
    Checked {
        op: CheckedOp,
        signed: bool,
        lhs: Operand,
        rhs: Operand,
    },
    BoundsCheckedIndex {
        base: Operand,
        index: Operand,
    },
    OptionUnwrap {
        value: Operand,
    },
}

impl Op {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Op::Const { .. } => "const",
            Op::Bin { op, .. } => op.mnemonic(),
            Op::Icmp { .. } => "icmp",
            Op::Cast { kind, .. } => kind.mnemonic(),
            Op::Alloc { .. } => "alloc",
            Op::Load { .. } => "load",
            Op::Store { .. } => "store",
            Op::FieldAddr { .. } => "field-addr",
            Op::IndexAddr { .. } => "index-addr",
            Op::Call { .. } => "call",
            Op::Checked { op, signed, .. } => op.mnemonic(*signed),
            Op::BoundsCheckedIndex { .. } => "bounds-checked-index",
            Op::OptionUnwrap { .. } => "option-unwrap",
        }
    }

    /// Safety-checked instructions that only the rust dialect may use.
    pub fn is_rust_only(&self) -> bool {
        matches!(
            self,
            Op::Checked { .. } | Op::BoundsCheckedIndex { .. } | Op::OptionUnwrap { .. }
        )
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Op::Const { .. } | Op::Alloc { .. } => vec![],
            Op::Bin { lhs, rhs, .. } | Op::Icmp { lhs, rhs, .. } | Op::Checked { lhs, rhs, .. } => {
                vec![lhs, rhs]
            }
            Op::Cast { value, .. } | Op::OptionUnwrap { value } => vec![value],
            Op::Load { ptr, .. } => vec![ptr],
            Op::Store { value, ptr } => vec![value, ptr],
            Op::FieldAddr { base, .. } => vec![base],
            Op::IndexAddr { base, index } | Op::BoundsCheckedIndex { base, index } => {
                vec![base, index]
            }
            Op::Call { args, .. } => args.iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    /// Result name and its (inferred) type.
    pub result: Option<(String, IrType)>,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Ret(Option<Operand>),
    Jmp(String),
    Br {
        cond: Operand,
        then_label: String,
        else_label: String,
    },
    Panic(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub instrs: Vec<Instr>,
    pub term: Terminator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    pub dialect: Dialect,
    pub params: Vec<Param>,
    pub ret: IrType,
    pub blocks: Vec<Block>,
}

impl IrFunction {
    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }
}

/// A parsed program: record definitions plus functions in source order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Module {
    pub records: RecordTable,
    pub functions: Vec<IrFunction>,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&IrFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}
