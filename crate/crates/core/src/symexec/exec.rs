// SPDX-License-Identifier: Apache-2.0

//! Depth-first path exploration.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::mir::{
    field_offset, size_of, BinOp, CastKind, CheckedOp, IrFunction, IrType, Op, Operand, Pred,
    RecordTable, Terminator,
};

use super::expr::{fold, BinKind, SymExpr, UnOp};
use super::feasible::{check_extension, Feasibility};
use super::memory::{
    pointee_shape, Access, Memory, Pointer, RegionId, RegionInfo, RegionKind, Value,
};
use super::{
    CheckKind, Constraint, ExecConfig, ExecError, ExecResult, OutputBinding, PathSummary, Terminal,
};

/// Initial machine state produced by the prologue.
#[derive(Debug, Clone)]
pub struct Symbolized {
    pub env: BTreeMap<String, Value>,
    pub memory: Memory,
}

impl Symbolized {
    pub fn regions(&self) -> Vec<&RegionInfo> {
        self.memory
            .regions
            .iter()
            .map(|r| r.info.as_ref())
            .collect()
    }
}

/// Binds every parameter to fresh symbolic state: scalars to `arg<i>`,
/// addresses to symbolic regions whose own pointer slots are created on
/// first use, down to the configured depth.
pub fn symbolize(
    f: &IrFunction,
    records: &RecordTable,
    cfg: &ExecConfig,
) -> Result<Symbolized, ExecError> {
    let mut memory = Memory::new(Arc::new(records.clone()), *cfg);
    let mut env = BTreeMap::new();
    for (i, p) in f.params.iter().enumerate() {
        let name = format!("arg{i}");
        let v = match p.ty.unwrap_optional() {
            IrType::Int(w) => Value::Int(SymExpr::sym(name, *w)),
            IrType::Address(pointee) => {
                let (elem, count, kind) = pointee_shape(pointee, cfg);
                let id = memory.add_region(RegionInfo {
                    name,
                    elem,
                    count,
                    kind,
                    symbolic: true,
                    depth: 1,
                    param: Some(i),
                });
                Value::Ptr(Pointer::to(id))
            }
            t @ (IrType::StrSlice | IrType::ByteVec) => {
                let suffix = if matches!(t, IrType::StrSlice) {
                    "slice"
                } else {
                    "vec"
                };
                let id = memory.add_region(RegionInfo {
                    name: format!("{name}.{suffix}"),
                    elem: t.clone(),
                    count: 1,
                    kind: RegionKind::Header,
                    symbolic: true,
                    depth: 1,
                    param: Some(i),
                });
                Value::Ptr(Pointer::to(id))
            }
            other => {
                return Err(ExecError::Unsupported(format!(
                    "parameter '{}' of type {other} is passed by value",
                    p.name
                )))
            }
        };
        env.insert(p.name.clone(), v);
    }
    Ok(Symbolized { env, memory })
}

#[derive(Debug, Clone)]
struct State {
    block: usize,
    env: HashMap<String, Value>,
    mem: Memory,
    constraints: Vec<Constraint>,
    visits: Vec<u32>,
    calls: BTreeMap<String, u32>,
}

enum Flow {
    Next,
    Goto(usize),
    Stop,
}

struct Engine<'a> {
    f: &'a IrFunction,
    records: &'a RecordTable,
    cfg: ExecConfig,
    types: HashMap<String, IrType>,
    summaries: Vec<PathSummary>,
    catalog: BTreeMap<String, RegionInfo>,
    deadline: Instant,
    incomplete: bool,
    halted: bool,
}

fn bin_kind(op: BinOp) -> BinKind {
    match op {
        BinOp::Add => BinKind::Add,
        BinOp::Sub => BinKind::Sub,
        BinOp::Mul => BinKind::Mul,
        BinOp::UDiv => BinKind::UDiv,
        BinOp::SDiv => BinKind::SDiv,
        BinOp::And => BinKind::And,
        BinOp::Or => BinKind::Or,
        BinOp::Xor => BinKind::Xor,
        BinOp::Shl => BinKind::Shl,
        BinOp::LShr => BinKind::LShr,
        BinOp::AShr => BinKind::AShr,
    }
}

/// Comparison as (kind, swap operands).
fn pred_kind(p: Pred) -> (BinKind, bool) {
    match p {
        Pred::Eq => (BinKind::Eq, false),
        Pred::Ne => (BinKind::Ne, false),
        Pred::Ult => (BinKind::Ult, false),
        Pred::Ule => (BinKind::Ule, false),
        Pred::Ugt => (BinKind::Ult, true),
        Pred::Uge => (BinKind::Ule, true),
        Pred::Slt => (BinKind::Slt, false),
        Pred::Sle => (BinKind::Sle, false),
        Pred::Sgt => (BinKind::Slt, true),
        Pred::Sge => (BinKind::Sle, true),
    }
}

/// Overflow predicate of a checked operation whose wrapped result is `r`.
pub(crate) fn overflow_predicate(
    op: CheckedOp,
    signed: bool,
    a: &SymExpr,
    b: &SymExpr,
    r: &SymExpr,
) -> SymExpr {
    use fold::{and, binary as bin, or};
    let w = a.width();
    let zero = SymExpr::constant(0, w);
    let neg = |x: &SymExpr| bin(BinKind::Slt, x.clone(), zero.clone());
    match (op, signed) {
        (CheckedOp::Add, false) => bin(BinKind::Ult, r.clone(), a.clone()),
        (CheckedOp::Sub, false) => bin(BinKind::Ult, a.clone(), b.clone()),
        (CheckedOp::Mul, false) => and(
            bin(BinKind::Ne, a.clone(), zero.clone()),
            bin(
                BinKind::Ne,
                bin(BinKind::UDiv, r.clone(), a.clone()),
                b.clone(),
            ),
        ),
        (CheckedOp::Add, true) => and(
            bin(BinKind::Eq, neg(a), neg(b)),
            bin(BinKind::Ne, neg(r), neg(a)),
        ),
        (CheckedOp::Sub, true) => and(
            bin(BinKind::Ne, neg(a), neg(b)),
            bin(BinKind::Ne, neg(r), neg(a)),
        ),
        (CheckedOp::Mul, true) => {
            let min = SymExpr::constant(1u64 << (w - 1), w);
            let ones = SymExpr::constant(u64::MAX, w);
            or(
                and(
                    bin(BinKind::Ne, a.clone(), zero.clone()),
                    bin(
                        BinKind::Ne,
                        bin(BinKind::SDiv, r.clone(), a.clone()),
                        b.clone(),
                    ),
                ),
                and(
                    bin(BinKind::Eq, a.clone(), ones),
                    bin(BinKind::Eq, b.clone(), min),
                ),
            )
        }
    }
}

fn display_path(region: &str) -> String {
    // `@k` segments in region names come from element slots.
    let mut out = String::new();
    let mut chars = region.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '@' {
            out.push('[');
            while let Some(d) = chars.peek().copied().filter(|d| d.is_ascii_digit()) {
                out.push(d);
                chars.next();
            }
            out.push(']');
        } else {
            out.push(c);
        }
    }
    out
}

impl<'a> Engine<'a> {
    fn ty_of(&self, o: &Operand, fallback: &IrType) -> IrType {
        match o {
            Operand::Value(n) => self
                .types
                .get(n)
                .cloned()
                .unwrap_or_else(|| fallback.clone()),
            _ => fallback.clone(),
        }
    }

    fn value(&self, st: &State, o: &Operand, ty: &IrType) -> Value {
        match o {
            Operand::Value(n) => st.env.get(n).cloned().expect("validated use"),
            Operand::Lit(v) => Value::Int(SymExpr::constant(*v, ty.int_width().unwrap_or(64))),
            Operand::Null => Value::Ptr(Pointer::null()),
        }
    }

    fn int(&self, st: &State, o: &Operand, ty: &IrType) -> Result<SymExpr, ExecError> {
        match self.value(st, o, ty) {
            Value::Int(e) => Ok(e),
            Value::Ptr(_) => Err(ExecError::Unsupported("address used as an integer".into())),
        }
    }

    fn ptr(&self, st: &State, o: &Operand) -> Result<Pointer, ExecError> {
        match self.value(st, o, &IrType::Int(64)) {
            Value::Ptr(p) => Ok(p),
            Value::Int(_) => Err(ExecError::Unsupported("integer used as an address".into())),
        }
    }

    fn note_regions(&mut self, mem: &Memory) {
        for r in &mem.regions {
            if !self.catalog.contains_key(&r.info.name) {
                self.catalog
                    .insert(r.info.name.clone(), r.info.as_ref().clone());
            }
        }
    }

    fn emit(&mut self, st: &State, constraints: Vec<Constraint>, terminal: Terminal) {
        self.note_regions(&st.mem);
        if self.summaries.len() >= self.cfg.path_cap {
            self.incomplete = true;
            self.halted = true;
            return;
        }
        self.summaries.push(PathSummary {
            constraints,
            ret: None,
            outputs: Vec::new(),
            terminal,
        });
    }

    fn has(st: &State, e: &SymExpr) -> bool {
        st.constraints.iter().any(|c| &c.expr == e)
    }

    fn feasible(&self, st: &State, e: &SymExpr) -> bool {
        let exprs: Vec<SymExpr> = st.constraints.iter().map(|c| c.expr.clone()).collect();
        check_extension(&exprs, e, self.cfg.feasibility_width) != Feasibility::Infeasible
    }

    /// Forks a safety check: a panic path under `fail` and the continuing
    /// path under `ok`. Returns whether the continuing path is feasible.
    fn guard(
        &mut self,
        st: &mut State,
        ok: SymExpr,
        fail: SymExpr,
        kind: CheckKind,
        code: &str,
    ) -> bool {
        match ok.as_const() {
            Some(1) => return true,
            Some(_) => {
                let cs = st.constraints.clone();
                self.emit(st, cs, Terminal::Panic(code.into()));
                return false;
            }
            None => {}
        }
        if Self::has(st, &ok) {
            return true;
        }
        if Self::has(st, &fail) {
            // the path already implies the failure
            let cs = st.constraints.clone();
            self.emit(st, cs, Terminal::Panic(code.into()));
            return false;
        }
        if self.feasible(st, &fail) {
            let mut cs = st.constraints.clone();
            cs.push(Constraint::check(kind, fail.clone()));
            self.emit(st, cs, Terminal::Panic(code.into()));
        }
        if !self.feasible(st, &ok) {
            return false;
        }
        st.constraints.push(Constraint::check(kind, ok));
        true
    }

    /// Bounds-checks an `n`-byte access; false when the path ended.
    fn access(&mut self, st: &mut State, p: &Pointer, n: u64) -> bool {
        match st.mem.check_access(p, n) {
            Access::InBounds => true,
            Access::Null => {
                let cs = st.constraints.clone();
                self.emit(st, cs, Terminal::Panic("null-deref".into()));
                false
            }
            Access::OutOfBounds => {
                let cs = st.constraints.clone();
                self.emit(st, cs, Terminal::Panic("memory".into()));
                false
            }
            Access::Guarded(ok) => {
                let fail = fold::not(ok.clone());
                self.guard(st, ok, fail, CheckKind::Memory, "memory")
            }
        }
    }

    fn scalar_bytes(&self, ty: &IrType) -> u64 {
        match ty.int_width() {
            Some(w) => u64::from(w.div_ceil(8)),
            None => 8,
        }
    }

    fn load(
        &mut self,
        st: &mut State,
        ty: &IrType,
        p: &Pointer,
    ) -> Result<Option<Value>, ExecError> {
        let n = self.scalar_bytes(ty);
        if !self.access(st, p, n) {
            return Ok(None);
        }
        Ok(Some(match ty.int_width() {
            Some(w) => {
                let v = st.mem.load_int(p, n)?;
                Value::Int(if w < 8 {
                    fold::unary(UnOp::Trunc, v, w)
                } else {
                    v
                })
            }
            None => Value::Ptr(st.mem.load_ptr(p)?),
        }))
    }

    fn step(&mut self, st: &mut State, bi: usize, ii: usize) -> Result<Flow, ExecError> {
        let ins = &self.f.blocks[bi].instrs[ii];
        let res_ty = ins
            .result
            .as_ref()
            .map(|(_, t)| t.clone())
            .unwrap_or(IrType::Unit);
        let dialect_rust = self.f.dialect == crate::mir::Dialect::Rust;
        let out: Option<Value> = match &ins.op {
            Op::Const { ty, value } => Some(Value::Int(SymExpr::constant(
                *value,
                ty.int_width().unwrap_or(64),
            ))),
            Op::Bin { op, lhs, rhs } => {
                let a = self.int(st, lhs, &res_ty)?;
                let b = self.int(st, rhs, &res_ty)?;
                let w = a.width();
                let kind = bin_kind(*op);
                if dialect_rust && matches!(kind, BinKind::UDiv | BinKind::SDiv) {
                    let ok = fold::binary(BinKind::Ne, b.clone(), SymExpr::constant(0, w));
                    let fail = fold::not(ok.clone());
                    if !self.guard(st, ok, fail, CheckKind::DivZero, "divzero") {
                        return Ok(Flow::Stop);
                    }
                    if kind == BinKind::SDiv {
                        let fail = fold::and(
                            fold::binary(
                                BinKind::Eq,
                                a.clone(),
                                SymExpr::constant(1u64 << (w - 1), w),
                            ),
                            fold::binary(BinKind::Eq, b.clone(), SymExpr::constant(u64::MAX, w)),
                        );
                        let ok = fold::not(fail.clone());
                        if !self.guard(st, ok, fail, CheckKind::Overflow, "overflow") {
                            return Ok(Flow::Stop);
                        }
                    }
                }
                Some(Value::Int(fold::binary(kind, a, b)))
            }
            Op::Icmp { pred, lhs, rhs } => {
                let anchor = match (lhs, rhs) {
                    (Operand::Value(_), _) => self.ty_of(lhs, &IrType::Int(64)),
                    _ => self.ty_of(rhs, &IrType::Int(64)),
                };
                let (kind, swap) = pred_kind(*pred);
                let (x, y) = (self.value(st, lhs, &anchor), self.value(st, rhs, &anchor));
                let (x, y) = if swap { (y, x) } else { (x, y) };
                let r = match (x, y) {
                    (Value::Int(a), Value::Int(b)) => fold::binary(kind, a, b),
                    (Value::Ptr(p), Value::Ptr(q)) => {
                        if p.base == q.base {
                            fold::binary(kind, p.offset, q.offset)
                        } else {
                            match kind {
                                BinKind::Eq => SymExpr::bool(false),
                                BinKind::Ne => SymExpr::bool(true),
                                _ => {
                                    return Err(ExecError::Unsupported(
                                        "ordering comparison of addresses in different regions"
                                            .into(),
                                    ))
                                }
                            }
                        }
                    }
                    _ => {
                        return Err(ExecError::Unsupported(
                            "comparison of an address with an integer".into(),
                        ))
                    }
                };
                Some(Value::Int(r))
            }
            Op::Cast { kind, to, value } => {
                let v = self.int(st, value, &res_ty)?;
                let op = match kind {
                    CastKind::ZExt => UnOp::ZExt,
                    CastKind::SExt => UnOp::SExt,
                    CastKind::Trunc => UnOp::Trunc,
                };
                Some(Value::Int(fold::unary(op, v, *to)))
            }
            Op::Alloc { ty } => {
                let id = st.mem.alloc_local(ty);
                Some(Value::Ptr(Pointer::to(id)))
            }
            Op::Load { ty, ptr } => {
                let p = self.ptr(st, ptr)?;
                match self.load(st, ty, &p)? {
                    Some(v) => Some(v),
                    None => return Ok(Flow::Stop),
                }
            }
            Op::Store { value, ptr } => {
                let p = self.ptr(st, ptr)?;
                let pointee = match self.ty_of(ptr, &IrType::Unit) {
                    IrType::Address(t) => *t,
                    other => return Err(ExecError::Unsupported(format!("store through {other}"))),
                };
                let n = self.scalar_bytes(&pointee);
                let v = match self.value(st, value, &pointee) {
                    Value::Int(e) if e.width() < 8 => Value::Int(fold::unary(UnOp::ZExt, e, 8)),
                    other => other,
                };
                if !self.access(st, &p, n) {
                    return Ok(Flow::Stop);
                }
                st.mem.store(&p, v, n)?;
                None
            }
            Op::FieldAddr { base, field } => {
                let p = self.ptr(st, base)?;
                let target = match self.ty_of(base, &IrType::Unit) {
                    IrType::Address(inner) => *inner,
                    other => other,
                };
                let (off, _) = field_offset(target.unwrap_optional(), field, self.records)
                    .ok_or_else(|| ExecError::Unsupported(format!("no field '{field}'")))?;
                Some(Value::Ptr(p.add(SymExpr::constant(off, 64))))
            }
            Op::IndexAddr { base, index } => {
                let p = self.ptr(st, base)?;
                let elem = match self.ty_of(base, &IrType::Unit) {
                    IrType::Address(inner) => match *inner {
                        IrType::Array(e, _) => *e,
                        other => other,
                    },
                    other => return Err(ExecError::Unsupported(format!("index-addr on {other}"))),
                };
                let idx = self.int(st, index, &IrType::Int(64))?;
                let idx = if idx.width() < 64 {
                    fold::unary(UnOp::SExt, idx, 64)
                } else {
                    idx
                };
                Some(Value::Ptr(
                    p.add(fold::scale(idx, size_of(&elem, self.records))),
                ))
            }
            Op::BoundsCheckedIndex { base, index } => {
                let p = self.ptr(st, base)?;
                let idx = self.int(st, index, &IrType::Int(64))?;
                let idx = if idx.width() < 64 {
                    fold::unary(UnOp::ZExt, idx, 64)
                } else {
                    idx
                };
                let bty = self.ty_of(base, &IrType::Unit);
                let handle = match bty.unwrap_optional() {
                    IrType::StrSlice | IrType::ByteVec => true,
                    IrType::Address(inner) => {
                        matches!(inner.as_ref(), IrType::StrSlice | IrType::ByteVec)
                    }
                    _ => false,
                };
                let (len, data, stride) = match bty.unwrap_optional() {
                    _ if handle => {
                        let Some(Value::Int(len)) =
                            self.load(st, &IrType::Int(64), &p.add(SymExpr::constant(8, 64)))?
                        else {
                            return Ok(Flow::Stop);
                        };
                        let Some(Value::Ptr(data)) =
                            self.load(st, &IrType::ptr(IrType::Int(8)), &p)?
                        else {
                            return Ok(Flow::Stop);
                        };
                        (len, data, 1)
                    }
                    IrType::Address(inner) => match inner.as_ref() {
                        IrType::Array(e, n) => (
                            SymExpr::constant(*n, 64),
                            p.clone(),
                            size_of(e, self.records),
                        ),
                        other => {
                            return Err(ExecError::Unsupported(format!(
                                "bounds-checked-index on *{other}"
                            )))
                        }
                    },
                    other => {
                        return Err(ExecError::Unsupported(format!(
                            "bounds-checked-index on {other}"
                        )))
                    }
                };
                let ok = fold::binary(BinKind::Ult, idx.clone(), len);
                let fail = fold::not(ok.clone());
                if !self.guard(st, ok, fail, CheckKind::Bounds, "bounds") {
                    return Ok(Flow::Stop);
                }
                Some(Value::Ptr(data.add(fold::scale(idx, stride))))
            }
            Op::OptionUnwrap { value } => {
                let p = self.ptr(st, value)?;
                if p.base.is_none() {
                    let ok = fold::binary(BinKind::Ne, p.offset.clone(), SymExpr::constant(0, 64));
                    let fail = fold::not(ok.clone());
                    if !self.guard(st, ok, fail, CheckKind::Unwrap, "unwrap") {
                        return Ok(Flow::Stop);
                    }
                }
                Some(Value::Ptr(p))
            }
            Op::Checked {
                op,
                signed,
                lhs,
                rhs,
            } => {
                let a = self.int(st, lhs, &res_ty)?;
                let b = self.int(st, rhs, &res_ty)?;
                let r = fold::binary(op.bin_op_kind(), a.clone(), b.clone());
                let fail = overflow_predicate(*op, *signed, &a, &b, &r);
                let ok = fold::not(fail.clone());
                if !self.guard(st, ok, fail, CheckKind::Overflow, "overflow") {
                    return Ok(Flow::Stop);
                }
                Some(Value::Int(r))
            }
            Op::Call { ret, callee, .. } => match ret {
                IrType::Unit => None,
                IrType::Int(w) => {
                    let seq = st.calls.entry(callee.clone()).or_insert(0);
                    let e = SymExpr::ext_call(callee.clone(), *seq, *w);
                    *seq += 1;
                    Some(Value::Int(e))
                }
                other => {
                    return Err(ExecError::Unsupported(format!(
                        "call to '{callee}' returning {other}"
                    )))
                }
            },
        };
        if let (Some((name, _)), Some(v)) = (&ins.result, out) {
            st.env.insert(name.clone(), v);
        }
        Ok(Flow::Next)
    }

    fn epilogue(&mut self, st: &mut State, ret: Option<&Operand>) -> Result<(), ExecError> {
        let ret_val = match (ret, &self.f.ret) {
            (None, _) | (_, IrType::Unit) => None,
            (Some(o), ty) => Some(match self.value(st, o, ty) {
                Value::Int(e) => e,
                Value::Ptr(p) => match ty.unwrap_optional() {
                    IrType::StrSlice | IrType::ByteVec if p.base.is_some() => {
                        // a handle is compared through its data pointer
                        let data = st.mem.load_ptr(&p)?;
                        st.mem.render(&data)
                    }
                    _ => st.mem.render(&p),
                },
            }),
        };
        let mut outputs = Vec::new();
        for idx in 0..st.mem.regions.len() {
            let info = st.mem.regions[idx].info.clone();
            let Some(pi) = info.param else { continue };
            if !self.f.params[pi].out || st.mem.regions[idx].written.is_empty() {
                continue;
            }
            for leaf in info.leaves(self.records) {
                let n = self.scalar_bytes(&leaf.ty);
                let touched = st.mem.regions[idx]
                    .written
                    .range(leaf.offset..leaf.offset + n)
                    .next()
                    .is_some();
                if !touched {
                    continue;
                }
                let value = match st.mem.leaf_value(RegionId(idx), &leaf)? {
                    Value::Int(e) => e,
                    Value::Ptr(p) => st.mem.render(&p),
                };
                outputs.push(OutputBinding {
                    path: format!("{}{}", display_path(&info.name), leaf.path),
                    region: info.name.clone(),
                    offset: leaf.offset,
                    value,
                });
            }
        }
        outputs.sort_by(|a, b| (&a.region, a.offset).cmp(&(&b.region, b.offset)));
        self.note_regions(&st.mem);
        if self.summaries.len() >= self.cfg.path_cap {
            self.incomplete = true;
            self.halted = true;
            return Ok(());
        }
        self.summaries.push(PathSummary {
            constraints: st.constraints.clone(),
            ret: ret_val,
            outputs,
            terminal: super::Terminal::Return,
        });
        Ok(())
    }

    /// Runs one state to completion, pushing forked siblings on `stack`.
    fn run(&mut self, mut st: State, stack: &mut Vec<State>) -> Result<(), ExecError> {
        let mut entering = true;
        loop {
            if self.halted {
                return Ok(());
            }
            if Instant::now() > self.deadline {
                self.incomplete = true;
                self.halted = true;
                return Ok(());
            }
            let bi = st.block;
            if entering {
                st.visits[bi] += 1;
                if st.visits[bi] > self.cfg.loop_unroll + 1 {
                    let cs = st.constraints.clone();
                    self.emit(&st, cs, Terminal::Exhausted);
                    return Ok(());
                }
            }
            for ii in 0..self.f.blocks[bi].instrs.len() {
                match self.step(&mut st, bi, ii)? {
                    Flow::Next => {}
                    Flow::Stop => return Ok(()),
                    Flow::Goto(_) => unreachable!("instructions do not jump"),
                }
            }
            let next = match &self.f.blocks[bi].term {
                Terminator::Ret(v) => {
                    self.epilogue(&mut st, v.as_ref())?;
                    return Ok(());
                }
                Terminator::Panic(code) => {
                    let cs = st.constraints.clone();
                    self.emit(&st, cs, Terminal::Panic(code.clone()));
                    return Ok(());
                }
                Terminator::Jmp(l) => Flow::Goto(self.f.block_index(l).expect("validated label")),
                Terminator::Br {
                    cond,
                    then_label,
                    else_label,
                } => {
                    let t = self.f.block_index(then_label).expect("validated label");
                    let e = self.f.block_index(else_label).expect("validated label");
                    let c = self.int(&st, cond, &IrType::Int(1))?;
                    self.branch(&mut st, c, t, e, stack)
                }
            };
            match next {
                Flow::Goto(b) => {
                    st.block = b;
                    entering = true;
                }
                _ => return Ok(()),
            }
        }
    }

    fn branch(
        &mut self,
        st: &mut State,
        c: SymExpr,
        t: usize,
        e: usize,
        stack: &mut Vec<State>,
    ) -> Flow {
        if let Some(v) = c.as_const() {
            return Flow::Goto(if v == 1 { t } else { e });
        }
        let not_c = SymExpr::not(c.clone());
        if Self::has(st, &c) {
            return Flow::Goto(t);
        }
        if Self::has(st, &not_c) {
            return Flow::Goto(e);
        }
        let then_ok = self.feasible(st, &c);
        let else_ok = self.feasible(st, &not_c);
        if else_ok {
            let mut other = st.clone();
            other.constraints.push(Constraint::branch(not_c));
            other.block = e;
            if !then_ok {
                *st = other;
                return Flow::Goto(e);
            }
            stack.push(other);
        }
        if then_ok {
            st.constraints.push(Constraint::branch(c));
            return Flow::Goto(t);
        }
        Flow::Stop
    }
}

impl CheckedOp {
    fn bin_op_kind(self) -> BinKind {
        bin_kind(self.bin_op())
    }
}

/// Explores every path of `f` (depth-first, then-branch first) and returns
/// one summary per path.
pub fn execute(
    f: &IrFunction,
    records: &RecordTable,
    cfg: &ExecConfig,
) -> Result<ExecResult, ExecError> {
    let sym = symbolize(f, records, cfg)?;
    let mut types: HashMap<String, IrType> = f
        .params
        .iter()
        .map(|p| (p.name.clone(), p.ty.clone()))
        .collect();
    for b in &f.blocks {
        for i in &b.instrs {
            if let Some((n, t)) = &i.result {
                types.insert(n.clone(), t.clone());
            }
        }
    }
    let mut engine = Engine {
        f,
        records,
        cfg: *cfg,
        types,
        summaries: Vec::new(),
        catalog: BTreeMap::new(),
        deadline: Instant::now() + Duration::from_secs(cfg.timeout_secs),
        incomplete: false,
        halted: false,
    };
    engine.note_regions(&sym.memory);
    let init = State {
        block: 0,
        env: sym.env.into_iter().collect(),
        mem: sym.memory,
        constraints: Vec::new(),
        visits: vec![0; f.blocks.len()],
        calls: BTreeMap::new(),
    };
    let mut stack = vec![init];
    while let Some(st) = stack.pop() {
        if engine.halted {
            engine.incomplete = true;
            break;
        }
        engine.run(st, &mut stack)?;
    }
    if engine.halted && !stack.is_empty() {
        engine.incomplete = true;
    }

    // initial contents of every reported leaf, for paths that leave it alone
    let mut initial = BTreeMap::new();
    for s in &engine.summaries {
        for o in &s.outputs {
            if initial.contains_key(&o.path) {
                continue;
            }
            let Some(info) = engine.catalog.get(&o.region) else {
                continue;
            };
            let mut mem = Memory::new(Arc::new(records.clone()), *cfg);
            let id = mem.add_region(info.clone());
            let Some(leaf) = info.leaf_at(o.offset, records) else {
                continue;
            };
            let v = match mem.leaf_value(id, &leaf)? {
                Value::Int(e) => e,
                Value::Ptr(p) => mem.render(&p),
            };
            initial.insert(o.path.clone(), v);
        }
    }

    let mut leaf_names = BTreeMap::new();
    for (name, info) in &engine.catalog {
        for leaf in info.leaves(records) {
            leaf_names.insert(
                (name.clone(), leaf.offset),
                format!("{}{}", display_path(name), leaf.path),
            );
        }
    }

    Ok(ExecResult {
        function: f.name.clone(),
        dialect: f.dialect,
        ret_type: f.ret.clone(),
        param_names: f.params.iter().map(|p| p.name.clone()).collect(),
        summaries: engine.summaries,
        incomplete: engine.incomplete,
        regions: engine.catalog,
        initial,
        leaf_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mir::parse_ir;
    use crate::symexec::eval::{eval_binary, eval_concrete, Valuation};

    fn run(src: &str) -> ExecResult {
        let m = parse_ir(src).unwrap();
        execute(&m.functions[0], &m.records, &ExecConfig::default()).unwrap()
    }

    #[test]
    fn straight_line_add() {
        let r = run("fn c f(a: i32, b: i32) -> i32 { e: r = add a, b; ret r }");
        assert_eq!(r.summaries.len(), 1);
        let s = &r.summaries[0];
        assert!(s.constraints.is_empty());
        assert_eq!(
            s.ret.as_ref().unwrap(),
            &SymExpr::binary(
                BinKind::Add,
                SymExpr::sym("arg0", 32),
                SymExpr::sym("arg1", 32)
            )
        );
    }

    #[test]
    fn checked_add_forks_a_panic_path() {
        let r = run("fn rust f(a: i8, b: i8) -> i8 { e: r = checked-add.s a, b; ret r }");
        assert_eq!(r.summaries.len(), 2);
        assert_eq!(r.summaries[0].terminal, Terminal::Panic("overflow".into()));
        assert_eq!(r.summaries[1].terminal, Terminal::Return);
        let fail = &r.summaries[0].constraints[0].expr;
        let ok = &r.summaries[1].constraints[0].expr;
        assert_eq!(ok, &SymExpr::not(fail.clone()));
        for x in 0..256u64 {
            for y in 0..256u64 {
                let mut v = Valuation::new();
                v.symbol("arg0", x).symbol("arg1", y);
                let wide = (x as i8 as i32) + (y as i8 as i32);
                let overflows = !(-128..=127).contains(&wide);
                assert_eq!(eval_concrete(fail, &v).unwrap() == 1, overflows);
                if !overflows {
                    let got = eval_concrete(r.summaries[1].ret.as_ref().unwrap(), &v).unwrap();
                    assert_eq!(got, eval_binary(BinKind::Add, x, y, 8));
                }
            }
        }
    }

    #[test]
    fn overflow_predicates_match_wide_arithmetic() {
        let (a, b) = (SymExpr::sym("a", 8), SymExpr::sym("b", 8));
        for op in [CheckedOp::Add, CheckedOp::Sub, CheckedOp::Mul] {
            for signed in [false, true] {
                let r = fold::binary(op.bin_op_kind(), a.clone(), b.clone());
                let pred = overflow_predicate(op, signed, &a, &b, &r);
                for x in 0..256u64 {
                    for y in 0..256u64 {
                        let (wx, wy) = if signed {
                            (x as i8 as i64, y as i8 as i64)
                        } else {
                            (x as i64, y as i64)
                        };
                        let exact = match op {
                            CheckedOp::Add => wx + wy,
                            CheckedOp::Sub => wx - wy,
                            CheckedOp::Mul => wx * wy,
                        };
                        let fits = if signed {
                            (-128..=127).contains(&exact)
                        } else {
                            (0..=255).contains(&exact)
                        };
                        let mut v = Valuation::new();
                        v.symbol("a", x).symbol("b", y);
                        assert_eq!(
                            eval_concrete(&pred, &v).unwrap() == 1,
                            !fits,
                            "{op:?} {signed} {x} {y}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn branches_get_complementary_constraints() {
        let r = run("fn c abs(a: i32) -> i32 {\ne:\n c = icmp slt a, 0\n br c, n, p\nn:\n r = sub 0, a\n ret r\np:\n ret a\n}");
        assert_eq!(r.summaries.len(), 2);
        let c0 = &r.summaries[0].constraints[0].expr;
        let c1 = &r.summaries[1].constraints[0].expr;
        assert_eq!(c1, &SymExpr::not(c0.clone()));
    }

    #[test]
    fn scalar_params_become_symbols() {
        let m = parse_ir("fn c f(a: i32) -> i32 { e: ret a }").unwrap();
        let s = symbolize(&m.functions[0], &m.records, &ExecConfig::default()).unwrap();
        assert_eq!(s.env["a"], Value::Int(SymExpr::sym("arg0", 32)));
        assert!(s.regions().is_empty());
    }

    #[test]
    fn slices_get_symbolic_buffers_with_fixed_length() {
        let r = run("fn rust f(s: str) -> i64 {\ne:\n l = field-addr s, len\n n = load i64 l\n p = bounds-checked-index s, 3\n b = load i8 p\n ret n\n}");
        let ret = r
            .summaries
            .iter()
            .find(|s| s.terminal == Terminal::Return)
            .unwrap();
        assert_eq!(ret.ret.as_ref().unwrap().as_const(), Some(100));
        let data = &r.regions["arg0"];
        assert_eq!(data.count, 100);
        assert_eq!(data.kind, RegionKind::Data);
    }

    #[test]
    fn nesting_stops_at_the_depth_limit() {
        // walk 12 links of a self-referential list
        let mut body = String::from("type N = { next: *N, v: i8 }\nfn c walk(p: *N) -> i8 {\ne:\n");
        let mut cur = "p".to_string();
        for i in 0..11 {
            body.push_str(&format!(
                "  a{i} = field-addr {cur}, next\n  p{i} = load *N a{i}\n"
            ));
            cur = format!("p{i}");
        }
        body.push_str(&format!(
            "  z = icmp eq {cur}, null\n  br z, yes, no\nyes:\n  ret 1\nno:\n  ret 0\n}}\n"
        ));
        let m = parse_ir(&body).unwrap();
        let r = execute(&m.functions[0], &m.records, &ExecConfig::default());
        // the 11th load reads through the null leaf of the 10th region
        let r = r.unwrap();
        assert_eq!(
            r.regions
                .values()
                .filter(|i| i.kind == RegionKind::Param)
                .count(),
            10
        );
        assert!(r
            .summaries
            .iter()
            .all(|s| s.terminal == Terminal::Panic("null-deref".into())));
    }

    #[test]
    fn epilogue_reports_only_written_leaves() {
        let r = run("type S = { a: i32, b: i32 }\nfn c f(out p: *S, x: i32) -> unit {\ne:\n q = field-addr p, b\n store x, q\n ret\n}");
        let s = &r.summaries[0];
        assert_eq!(s.outputs.len(), 1);
        assert_eq!(s.outputs[0].path, "arg0.b");
        assert_eq!(s.outputs[0].value, SymExpr::sym("arg1", 32));
        assert_eq!(
            r.initial["arg0.b"],
            SymExpr::read("arg0", SymExpr::constant(4, 64), 32)
        );
    }

    #[test]
    fn loops_close_as_exhausted() {
        let r = run("fn c spin(a: i8) -> i8 {\ne:\n jmp h\nh:\n c = icmp eq a, 0\n br c, h, x\nx:\n ret a\n}");
        assert!(r
            .summaries
            .iter()
            .any(|s| s.terminal == Terminal::Exhausted));
        assert!(r.summaries.iter().any(|s| s.terminal == Terminal::Return));
    }

    #[test]
    fn external_calls_are_opaque_and_numbered() {
        let r = run(
            "fn c f() -> i32 {\ne:\n x = call i32 g()\n y = call i32 g()\n z = add x, y\n ret z\n}",
        );
        let ret = r.summaries[0].ret.clone().unwrap();
        assert_eq!(
            ret,
            SymExpr::binary(
                BinKind::Add,
                SymExpr::ext_call("g", 0, 32),
                SymExpr::ext_call("g", 1, 32)
            )
        );
    }

    #[test]
    fn rust_division_forks_divisor_zero() {
        let r = run("fn rust f(a: i8, b: i8) -> i8 { e: q = udiv a, b; ret q }");
        assert_eq!(r.summaries[0].terminal, Terminal::Panic("divzero".into()));
        let c = run("fn c f(a: i8, b: i8) -> i8 { e: q = udiv a, b; ret q }");
        assert_eq!(c.summaries.len(), 1);
    }

    #[test]
    fn deterministic_summaries() {
        let src = "fn rust f(a: i8, b: i8) -> i8 {\ne:\n c = icmp ult a, b\n br c, x, y\nx:\n r = checked-mul.u a, b\n ret r\ny:\n ret b\n}";
        assert_eq!(run(src).summaries, run(src).summaries);
    }
}
