// SPDX-License-Identifier: Apache-2.0

//! Symbolic memory: byte-addressed regions with lazily materialized
//! pointer slots and a per-region write-set.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::mir::{layout_of, size_of, IrType, LayoutEntry, RecordTable};

use super::expr::{fold, BinKind, SymExpr, UnOp};
use super::{ExecConfig, ExecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// Pointee of a parameter, or of a pointer reachable from one.
    Param,
    /// Header of a string-slice or byte-vector handle.
    Header,
    /// Element buffer behind a header's data pointer.
    Data,
    Local,
}

/// Static description of a region; identical on every path that creates it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionInfo {
    pub name: String,
    #[serde(serialize_with = "crate::symexec::ser_type")]
    pub elem: IrType,
    pub count: u64,
    pub kind: RegionKind,
    /// Initial bytes are symbolic (zero for locals).
    pub symbolic: bool,
    pub depth: u32,
    /// Index of the parameter this region hangs off.
    pub param: Option<usize>,
}

impl RegionInfo {
    pub fn elem_size(&self, records: &RecordTable) -> u64 {
        size_of(&self.elem, records)
    }

    pub fn size(&self, records: &RecordTable) -> u64 {
        self.elem_size(records) * self.count
    }

    /// Records and headers name their leaves by field; everything else by
    /// element index.
    fn indexed(&self) -> bool {
        !(self.count == 1
            && matches!(
                self.elem,
                IrType::Record(_) | IrType::StrSlice | IrType::ByteVec
            ))
    }

    /// Every leaf of the region with its access path relative to the region.
    pub fn leaves(&self, records: &RecordTable) -> Vec<LayoutEntry> {
        let stride = self.elem_size(records);
        let elem = layout_of(&self.elem, records);
        let mut out = Vec::with_capacity(elem.len() * self.count as usize);
        for k in 0..self.count {
            for e in &elem {
                let path = if self.indexed() {
                    format!("[{k}]{}", e.path)
                } else {
                    e.path.clone()
                };
                out.push(LayoutEntry {
                    offset: k * stride + e.offset,
                    ty: e.ty.clone(),
                    path,
                });
            }
        }
        out
    }

    /// Leaf whose bytes include `offset`.
    pub fn leaf_at(&self, offset: u64, records: &RecordTable) -> Option<LayoutEntry> {
        let stride = self.elem_size(records);
        if stride == 0 {
            return None;
        }
        let k = offset / stride;
        if k >= self.count {
            return None;
        }
        let within = offset - k * stride;
        let e = layout_of(&self.elem, records)
            .into_iter()
            .find(|e| within >= e.offset && within < e.offset + size_of(&e.ty, records))?;
        let path = if self.indexed() {
            format!("[{k}]{}", e.path)
        } else {
            e.path
        };
        Some(LayoutEntry {
            offset: k * stride + e.offset,
            ty: e.ty,
            path,
        })
    }

    /// Name of the region created for the pointer slot at `leaf_path`.
    pub fn child_name(&self, leaf_path: &str, header_slot: bool) -> String {
        if header_slot {
            if self.kind == RegionKind::Header {
                return self
                    .name
                    .strip_suffix(".slice")
                    .or_else(|| self.name.strip_suffix(".vec"))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("{}.data", self.name));
            }
            let base = leaf_path.strip_suffix(".data").unwrap_or(leaf_path);
            return format!("{}{}", self.name, region_path(base));
        }
        format!("{}{}", self.name, region_path(leaf_path))
    }
}

/// Region names avoid brackets so they stay valid bare identifiers.
fn region_path(path: &str) -> String {
    path.replace('[', "@").replace(']', "")
}

/// Address value: region plus 64-bit byte offset. `base == None` is null.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointer {
    pub base: Option<RegionId>,
    pub offset: SymExpr,
}

impl Pointer {
    pub fn null() -> Pointer {
        Pointer {
            base: None,
            offset: SymExpr::constant(0, 64),
        }
    }

    pub fn to(base: RegionId) -> Pointer {
        Pointer {
            base: Some(base),
            offset: SymExpr::constant(0, 64),
        }
    }

    pub fn add(&self, delta: SymExpr) -> Pointer {
        Pointer {
            base: self.base,
            offset: fold::add_offset(self.offset.clone(), delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(SymExpr),
    Ptr(Pointer),
}

#[derive(Debug, Clone)]
enum Cell {
    Val { value: SymExpr, start: u64 },
    Ptr { ptr: Pointer, start: u64 },
}

#[derive(Debug, Clone)]
pub struct RegionState {
    pub info: Arc<RegionInfo>,
    cells: BTreeMap<u64, Cell>,
    pub written: BTreeSet<u64>,
}

/// Outcome of a bounds check on an access.
#[derive(Debug, Clone)]
pub enum Access {
    Null,
    OutOfBounds,
    InBounds,
    /// In bounds iff the (width-1) condition holds.
    Guarded(SymExpr),
}

#[derive(Debug, Clone)]
pub struct Memory {
    pub regions: Vec<RegionState>,
    records: Arc<RecordTable>,
    cfg: ExecConfig,
    locals: usize,
}

/// Region shape used for the pointee of an address of type `*pointee`.
pub(crate) fn pointee_shape(pointee: &IrType, cfg: &ExecConfig) -> (IrType, u64, RegionKind) {
    match pointee.unwrap_optional() {
        IrType::Int(_) => (
            pointee.unwrap_optional().clone(),
            cfg.slice_length,
            RegionKind::Param,
        ),
        IrType::StrSlice | IrType::ByteVec => {
            (pointee.unwrap_optional().clone(), 1, RegionKind::Header)
        }
        other => (other.clone(), 1, RegionKind::Param),
    }
}

impl Memory {
    pub fn new(records: Arc<RecordTable>, cfg: ExecConfig) -> Memory {
        Memory {
            regions: Vec::new(),
            records,
            cfg,
            locals: 0,
        }
    }

    pub fn records(&self) -> &RecordTable {
        &self.records
    }

    pub fn info(&self, id: RegionId) -> &RegionInfo {
        &self.regions[id.0].info
    }

    pub fn find(&self, name: &str) -> Option<RegionId> {
        self.regions
            .iter()
            .position(|r| r.info.name == name)
            .map(RegionId)
    }

    /// Adds a region; header length/capacity slots start at the configured
    /// slice length.
    pub fn add_region(&mut self, info: RegionInfo) -> RegionId {
        let mut state = RegionState {
            info: Arc::new(info),
            cells: BTreeMap::new(),
            written: BTreeSet::new(),
        };
        if state.info.symbolic {
            for leaf in state.info.leaves(&self.records) {
                if header_kind(&state.info, leaf.offset, &self.records).1 {
                    let v = SymExpr::constant(self.cfg.slice_length, 64);
                    for i in 0..8 {
                        state.cells.insert(
                            leaf.offset + i,
                            Cell::Val {
                                value: v.clone(),
                                start: leaf.offset,
                            },
                        );
                    }
                }
            }
        }
        self.regions.push(state);
        RegionId(self.regions.len() - 1)
    }

    pub fn alloc_local(&mut self, ty: &IrType) -> RegionId {
        let name = format!("local{}", self.locals);
        self.locals += 1;
        self.add_region(RegionInfo {
            name,
            elem: ty.clone(),
            count: 1,
            kind: RegionKind::Local,
            symbolic: false,
            depth: 0,
            param: None,
        })
    }

    /// Region description for the pointee of a pointer slot, or `None` when
    /// the depth limit is reached.
    pub fn child_info(&self, parent: &RegionInfo, leaf: &LayoutEntry) -> Option<RegionInfo> {
        let IrType::Address(pointee) = leaf.ty.unwrap_optional() else {
            return None;
        };
        let depth = parent.depth + 1;
        if depth > self.cfg.depth_limit {
            return None;
        }
        let header_slot = header_kind(parent, leaf.offset, &self.records).0;
        let (elem, count, kind) = if header_slot {
            (IrType::Int(8), self.cfg.slice_length, RegionKind::Data)
        } else {
            pointee_shape(pointee, &self.cfg)
        };
        Some(RegionInfo {
            name: parent.child_name(&leaf.path, header_slot),
            elem,
            count,
            kind,
            symbolic: true,
            depth,
            param: parent.param,
        })
    }

    fn materialize(&mut self, id: RegionId, leaf: &LayoutEntry) -> Pointer {
        let parent = self.regions[id.0].info.clone();
        let ptr = match self.child_info(&parent, leaf) {
            None => Pointer::null(),
            Some(info) => {
                let child = match self.find(&info.name) {
                    Some(existing) => existing,
                    None => self.add_region(info),
                };
                Pointer::to(child)
            }
        };
        let cells = &mut self.regions[id.0].cells;
        for i in 0..8 {
            cells.insert(
                leaf.offset + i,
                Cell::Ptr {
                    ptr: ptr.clone(),
                    start: leaf.offset,
                },
            );
        }
        ptr
    }

    /// Bounds status of an `n`-byte access through `p`.
    pub fn check_access(&self, p: &Pointer, n: u64) -> Access {
        let Some(id) = p.base else {
            return Access::Null;
        };
        let size = self.regions[id.0].info.size(&self.records);
        if n > size {
            return Access::OutOfBounds;
        }
        match p.offset.as_const() {
            Some(o) if o.checked_add(n).is_some_and(|end| end <= size) => Access::InBounds,
            Some(_) => Access::OutOfBounds,
            None => Access::Guarded(fold::binary(
                BinKind::Ult,
                p.offset.clone(),
                SymExpr::constant(size - n + 1, 64),
            )),
        }
    }

    fn initial_byte(&self, id: RegionId, off: u64) -> SymExpr {
        let info = &self.regions[id.0].info;
        if info.symbolic {
            SymExpr::read(info.name.clone(), SymExpr::constant(off, 64), 8)
        } else {
            SymExpr::constant(0, 8)
        }
    }

    /// Loads an `n`-byte integer. The access must be in bounds.
    pub fn load_int(&mut self, p: &Pointer, n: u64) -> Result<SymExpr, ExecError> {
        let id = p.base.expect("checked access");
        let width = (n * 8) as u32;
        let Some(o) = p.offset.as_const() else {
            return self.load_int_symbolic(id, &p.offset, n);
        };
        let region = &self.regions[id.0];
        let cells: Vec<Option<&Cell>> = (o..o + n).map(|b| region.cells.get(&b)).collect();
        if cells.iter().all(|c| c.is_none()) {
            let info = &region.info;
            return Ok(if info.symbolic {
                SymExpr::read(info.name.clone(), SymExpr::constant(o, 64), width)
            } else {
                SymExpr::constant(0, width)
            });
        }
        if let Some(Cell::Val { value, start }) = cells[0] {
            if *start == o && u64::from(value.width()) == 8 * n {
                return Ok(value.clone());
            }
        }
        // Mixed bytes: reassemble little-endian.
        let mut acc: Option<SymExpr> = None;
        for (i, c) in cells.iter().enumerate() {
            let b = o + i as u64;
            let byte = match c {
                None => self.initial_byte(id, b),
                Some(Cell::Val { value, start }) => {
                    let shift = 8 * (b - start);
                    let shifted = if shift == 0 {
                        value.clone()
                    } else {
                        fold::binary(
                            BinKind::LShr,
                            value.clone(),
                            SymExpr::constant(shift, value.width()),
                        )
                    };
                    if shifted.width() == 8 {
                        shifted
                    } else {
                        fold::unary(UnOp::Trunc, shifted, 8)
                    }
                }
                Some(Cell::Ptr { ptr, .. })
                    if ptr.base.is_none() && ptr.offset.as_const() == Some(0) =>
                {
                    SymExpr::constant(0, 8)
                }
                Some(Cell::Ptr { .. }) => {
                    return Err(ExecError::Unsupported(
                        "integer load overlapping a stored address".into(),
                    ))
                }
            };
            let wide = if width == 8 {
                byte
            } else {
                fold::unary(UnOp::ZExt, byte, width)
            };
            let placed = if i == 0 {
                wide
            } else {
                fold::binary(BinKind::Shl, wide, SymExpr::constant(8 * i as u64, width))
            };
            acc = Some(match acc {
                None => placed,
                Some(a) => fold::binary(BinKind::Or, a, placed),
            });
        }
        Ok(acc.expect("n > 0"))
    }

    fn load_int_symbolic(
        &mut self,
        id: RegionId,
        off: &SymExpr,
        n: u64,
    ) -> Result<SymExpr, ExecError> {
        let width = (n * 8) as u32;
        let region = &self.regions[id.0];
        let mut starts: BTreeMap<u64, SymExpr> = BTreeMap::new();
        for (b, c) in &region.cells {
            match c {
                Cell::Val { value, start } if u64::from(value.width()) == 8 * n => {
                    if *b == *start {
                        starts.insert(*start, value.clone());
                    }
                }
                _ => {
                    return Err(ExecError::Unsupported(format!(
                        "load at a symbolic offset from region '{}' with mixed-width contents",
                        region.info.name
                    )))
                }
            }
        }
        let mut acc = if region.info.symbolic {
            SymExpr::read(region.info.name.clone(), off.clone(), width)
        } else {
            SymExpr::constant(0, width)
        };
        for (s, v) in starts.into_iter().rev() {
            let hit = fold::binary(BinKind::Eq, off.clone(), SymExpr::constant(s, 64));
            acc = fold::ite(hit, v, acc);
        }
        Ok(acc)
    }

    /// Loads an address. The access must be in bounds.
    pub fn load_ptr(&mut self, p: &Pointer) -> Result<Pointer, ExecError> {
        let id = p.base.expect("checked access");
        let Some(o) = p.offset.as_const() else {
            return Err(ExecError::Unsupported(
                "address load at a symbolic offset".into(),
            ));
        };
        let region = &self.regions[id.0];
        match region.cells.get(&o) {
            Some(Cell::Ptr { ptr, start }) if *start == o => return Ok(ptr.clone()),
            Some(Cell::Val { value, .. }) if value.as_const() == Some(0) => {
                let all_zero = (o..o + 8).all(|b| matches!(region.cells.get(&b), Some(Cell::Val { value, .. }) if value.as_const() == Some(0)));
                if all_zero {
                    return Ok(Pointer::null());
                }
            }
            None if (o..o + 8).all(|b| !region.cells.contains_key(&b)) => {
                if !region.info.symbolic {
                    return Ok(Pointer::null());
                }
                let info = region.info.clone();
                if let Some(leaf) = info.leaf_at(o, &self.records) {
                    if leaf.offset == o && leaf.ty.is_pointer_like() {
                        return Ok(self.materialize(id, &leaf));
                    }
                }
            }
            _ => {}
        }
        Err(ExecError::Unsupported(format!(
            "address load from non-address bytes of region '{}'",
            self.regions[id.0].info.name
        )))
    }

    /// Stores `n` bytes at a constant, in-bounds offset.
    pub fn store(&mut self, p: &Pointer, value: Value, n: u64) -> Result<(), ExecError> {
        let id = p.base.expect("checked access");
        let Some(o) = p.offset.as_const() else {
            return Err(ExecError::Unsupported("store at a symbolic offset".into()));
        };
        let region = &mut self.regions[id.0];
        for b in o..o + n {
            let cell = match &value {
                Value::Int(v) => Cell::Val {
                    value: v.clone(),
                    start: o,
                },
                Value::Ptr(ptr) => Cell::Ptr {
                    ptr: ptr.clone(),
                    start: o,
                },
            };
            region.cells.insert(b, cell);
            region.written.insert(b);
        }
        Ok(())
    }

    /// Current value of a leaf, for the epilogue.
    pub fn leaf_value(&mut self, id: RegionId, leaf: &LayoutEntry) -> Result<Value, ExecError> {
        let p = Pointer {
            base: Some(id),
            offset: SymExpr::constant(leaf.offset, 64),
        };
        if leaf.ty.is_pointer_like() {
            Ok(Value::Ptr(self.load_ptr(&p)?))
        } else {
            let w = leaf.ty.int_width().expect("leaf is scalar");
            let n = u64::from(w.div_ceil(8));
            let v = self.load_int(&p, n)?;
            Ok(Value::Int(if w < 8 {
                fold::unary(UnOp::Trunc, v, w)
            } else {
                v
            }))
        }
    }

    /// Symbolic rendering of an address: the region's base symbol plus the
    /// offset; null renders as its offset.
    pub fn render(&self, p: &Pointer) -> SymExpr {
        match p.base {
            None => p.offset.clone(),
            Some(id) => fold::add_offset(
                SymExpr::sym(self.regions[id.0].info.name.clone(), 64),
                p.offset.clone(),
            ),
        }
    }
}

/// Offsets (within one element of `ty`) of inline header fields: data
/// pointers and length/capacity words.
fn header_slots(
    ty: &IrType,
    records: &RecordTable,
    base: u64,
    data: &mut BTreeSet<u64>,
    counts: &mut BTreeSet<u64>,
) {
    match ty {
        IrType::StrSlice | IrType::ByteVec => {
            data.insert(base);
            counts.insert(base + 8);
            if matches!(ty, IrType::ByteVec) {
                counts.insert(base + 16);
            }
        }
        IrType::Optional(inner) => header_slots(inner, records, base, data, counts),
        IrType::Record(name) => {
            let Some(def) = records.get(name) else { return };
            let mut off = base;
            for (_, fty) in &def.fields {
                header_slots(fty, records, off, data, counts);
                off += size_of(fty, records);
            }
        }
        IrType::Array(elem, n) => {
            let stride = size_of(elem, records);
            for i in 0..*n {
                header_slots(elem, records, base + i * stride, data, counts);
            }
        }
        _ => {}
    }
}

fn header_kind(info: &RegionInfo, offset: u64, records: &RecordTable) -> (bool, bool) {
    let stride = info.elem_size(records);
    if stride == 0 {
        return (false, false);
    }
    let (mut data, mut counts) = (BTreeSet::new(), BTreeSet::new());
    header_slots(&info.elem, records, 0, &mut data, &mut counts);
    let within = offset % stride;
    (data.contains(&within), counts.contains(&within))
}
