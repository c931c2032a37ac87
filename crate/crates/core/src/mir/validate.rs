// SPDX-License-Identifier: Apache-2.0

//! Type inference and structural validation for mini-IR functions.
//!
//! Validation fills in the inferred result type of every instruction and
//! masks integer literals to the width they are used at, so a module that
//! passes validation is in canonical form.

use std::collections::{BTreeSet, HashMap};

use super::layout::field_offset;
use super::types::*;
use super::MirError;

/// Per function, per block: source position of each instruction followed by
/// the terminator.
pub type Locations = HashMap<String, Vec<Vec<(usize, usize)>>>;

struct Ctx<'a> {
    func: &'a str,
    locs: Option<&'a Vec<Vec<(usize, usize)>>>,
}

impl Ctx<'_> {
    fn at(&self, block: usize, idx: usize) -> (usize, usize) {
        self.locs
            .and_then(|l| l.get(block))
            .and_then(|b| b.get(idx))
            .copied()
            .unwrap_or((0, 0))
    }

    fn type_err(&self, block: usize, idx: usize, msg: impl Into<String>) -> MirError {
        let (line, col) = self.at(block, idx);
        MirError::Type {
            line,
            col,
            function: self.func.to_string(),
            msg: msg.into(),
        }
    }
}

fn mask(v: u64, w: u32) -> u64 {
    if w >= 64 {
        v
    } else {
        v & ((1u64 << w) - 1)
    }
}

/// Validates a module built in code (no source positions available).
pub fn validate_module(module: &mut Module) -> Result<(), MirError> {
    validate_module_with(module, None)
}

pub(crate) fn validate_module_with(
    module: &mut Module,
    locs: Option<&Locations>,
) -> Result<(), MirError> {
    check_records(&module.records)?;
    let records = module.records.clone();
    for f in &mut module.functions {
        let ctx = Ctx {
            func: &f.name.clone(),
            locs: locs.and_then(|l| l.get(&f.name)),
        };
        validate_function(f, &records, &ctx)?;
    }
    Ok(())
}

fn check_type(ty: &IrType, records: &RecordTable) -> Result<(), String> {
    match ty {
        IrType::Int(w) if INT_WIDTHS.contains(w) => Ok(()),
        IrType::Int(w) => Err(format!("unsupported integer width {w}")),
        IrType::Address(inner) => check_type(inner, records),
        IrType::Record(name) if records.contains_key(name) => Ok(()),
        IrType::Record(name) => Err(format!("unknown record type '{name}'")),
        IrType::Array(elem, _) => check_type(elem, records),
        IrType::Optional(inner) if IrType::optional_allowed(inner) => check_type(inner, records),
        IrType::Optional(inner) => Err(format!(
            "opt<{inner}> is not allowed; optional wraps addresses, str or vec"
        )),
        IrType::StrSlice | IrType::ByteVec | IrType::Unit => Ok(()),
    }
}

fn check_records(records: &RecordTable) -> Result<(), MirError> {
    let structure = |msg: String| MirError::Structure {
        function: String::new(),
        msg,
    };
    for def in records.values() {
        let mut seen = BTreeSet::new();
        for (f, t) in &def.fields {
            if !seen.insert(f) {
                return Err(structure(format!(
                    "record '{}' repeats field '{f}'",
                    def.name
                )));
            }
            check_type(t, records).map_err(structure)?;
            if matches!(t, IrType::Unit) {
                return Err(structure(format!("record '{}' has a unit field", def.name)));
            }
        }
    }
    // by-value containment must be acyclic
    fn contains(
        ty: &IrType,
        target: &str,
        records: &RecordTable,
        seen: &mut BTreeSet<String>,
    ) -> bool {
        match ty {
            IrType::Record(n) => {
                if n == target {
                    return true;
                }
                if !seen.insert(n.clone()) {
                    return false;
                }
                records.get(n).is_some_and(|d| {
                    d.fields
                        .iter()
                        .any(|(_, t)| contains(t, target, records, seen))
                })
            }
            IrType::Array(e, _) => contains(e, target, records, seen),
            _ => false,
        }
    }
    for def in records.values() {
        let mut seen = BTreeSet::new();
        if def
            .fields
            .iter()
            .any(|(_, t)| contains(t, &def.name, records, &mut seen))
        {
            return Err(structure(format!(
                "record '{}' contains itself by value",
                def.name
            )));
        }
    }
    Ok(())
}

/// Reverse postorder of the blocks reachable from the entry block.
pub(crate) fn reverse_postorder(f: &IrFunction) -> Vec<usize> {
    let succ = successors(f);
    let mut seen = vec![false; f.blocks.len()];
    let mut post = Vec::new();
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    while let Some((b, i)) = stack.pop() {
        if i < succ[b].len() {
            stack.push((b, i + 1));
            let s = succ[b][i];
            if !seen[s] {
                seen[s] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(b);
        }
    }
    post.reverse();
    post
}

pub(crate) fn successors(f: &IrFunction) -> Vec<Vec<usize>> {
    f.blocks
        .iter()
        .map(|b| match &b.term {
            Terminator::Jmp(l) => f.block_index(l).into_iter().collect(),
            Terminator::Br {
                then_label,
                else_label,
                ..
            } => {
                let mut v: Vec<usize> = f.block_index(then_label).into_iter().collect();
                v.extend(f.block_index(else_label));
                v
            }
            _ => vec![],
        })
        .collect()
}

/// Dominator sets (as sorted vectors) for reachable blocks.
fn dominators(f: &IrFunction, rpo: &[usize]) -> Vec<Option<BTreeSet<usize>>> {
    let n = f.blocks.len();
    let succ = successors(f);
    let mut preds = vec![Vec::new(); n];
    for (b, ss) in succ.iter().enumerate() {
        for &s in ss {
            preds[s].push(b);
        }
    }
    let reachable: BTreeSet<usize> = rpo.iter().copied().collect();
    let mut dom: Vec<Option<BTreeSet<usize>>> = vec![None; n];
    dom[0] = Some([0].into_iter().collect());
    for &b in rpo.iter().skip(1) {
        dom[b] = Some(reachable.clone());
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut acc: Option<BTreeSet<usize>> = None;
            for &p in &preds[b] {
                if let Some(pd) = &dom[p] {
                    acc = Some(match acc {
                        None => pd.clone(),
                        Some(a) => a.intersection(pd).copied().collect(),
                    });
                }
            }
            let mut new = acc.unwrap_or_default();
            new.insert(b);
            if dom[b].as_ref() != Some(&new) {
                dom[b] = Some(new);
                changed = true;
            }
        }
    }
    dom
}

fn validate_function(
    f: &mut IrFunction,
    records: &RecordTable,
    ctx: &Ctx<'_>,
) -> Result<(), MirError> {
    let structure = |msg: String| MirError::Structure {
        function: f.name.clone(),
        msg,
    };
    let mut labels = BTreeSet::new();
    for b in &f.blocks {
        if !labels.insert(b.label.clone()) {
            return Err(structure(format!("duplicate block label '{}'", b.label)));
        }
    }
    for p in &f.params {
        check_type(&p.ty, records)
            .map_err(|m| structure(format!("parameter '{}': {m}", p.name)))?;
        if matches!(p.ty, IrType::Unit) {
            return Err(structure(format!("parameter '{}' has unit type", p.name)));
        }
    }
    check_type(&f.ret, records).map_err(|m| structure(format!("return type: {m}")))?;

    // dialect soundness first: it is the most specific diagnosis
    if f.dialect == Dialect::C {
        for (bi, b) in f.blocks.iter().enumerate() {
            for (ii, ins) in b.instrs.iter().enumerate() {
                if ins.op.is_rust_only() {
                    let (line, col) = ctx.at(bi, ii);
                    return Err(MirError::Dialect {
                        line,
                        col,
                        function: f.name.clone(),
                        opcode: ins.op.mnemonic().to_string(),
                    });
                }
            }
        }
    }

    // definition sites
    let mut def_site: HashMap<String, (usize, usize)> = HashMap::new();
    for p in &f.params {
        if def_site.insert(p.name.clone(), (usize::MAX, 0)).is_some() {
            return Err(structure(format!("parameter '{}' declared twice", p.name)));
        }
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, ins) in b.instrs.iter().enumerate() {
            if let Some((name, _)) = &ins.result {
                if def_site.insert(name.clone(), (bi, ii)).is_some() {
                    let (line, col) = ctx.at(bi, ii);
                    return Err(MirError::Type {
                        line,
                        col,
                        function: f.name.clone(),
                        msg: format!("value '{name}' assigned more than once"),
                    });
                }
            }
        }
    }

    let rpo = reverse_postorder(f);
    let dom = dominators(f, &rpo);
    let mut order = rpo.clone();
    for b in 0..f.blocks.len() {
        if !order.contains(&b) {
            order.push(b);
        }
    }

    let mut types: HashMap<String, IrType> = f
        .params
        .iter()
        .map(|p| (p.name.clone(), p.ty.clone()))
        .collect();
    let ret_ty = f.ret.clone();
    let block_labels: BTreeSet<String> = labels;

    for &bi in &order {
        let ninstr = f.blocks[bi].instrs.len();
        for ii in 0..=ninstr {
            // uses must be dominated by their definitions
            let uses: Vec<String> = if ii < ninstr {
                f.blocks[bi].instrs[ii]
                    .op
                    .operands()
                    .into_iter()
                    .filter_map(|o| match o {
                        Operand::Value(n) => Some(n.clone()),
                        _ => None,
                    })
                    .collect()
            } else {
                match &f.blocks[bi].term {
                    Terminator::Ret(Some(Operand::Value(n))) => vec![n.clone()],
                    Terminator::Br {
                        cond: Operand::Value(n),
                        ..
                    } => vec![n.clone()],
                    _ => vec![],
                }
            };
            for u in &uses {
                let (line, col) = ctx.at(bi, ii);
                let undefined = || MirError::Undefined {
                    line,
                    col,
                    function: f.name.clone(),
                    name: u.clone(),
                };
                let Some(&(db, di)) = def_site.get(u) else {
                    return Err(undefined());
                };
                if db == usize::MAX {
                    continue;
                }
                let ok = if db == bi {
                    di < ii
                } else {
                    match &dom[bi] {
                        Some(d) => d.contains(&db),
                        None => true, // unreachable block
                    }
                };
                if !ok || !types.contains_key(u) {
                    return Err(undefined());
                }
            }
            if ii < ninstr {
                let ins = &mut f.blocks[bi].instrs[ii];
                let ty = infer(&mut ins.op, &types, records, f.dialect)
                    .map_err(|m| ctx.type_err(bi, ii, m))?;
                match (&mut ins.result, ty) {
                    (Some((name, slot)), Some(t)) => {
                        *slot = t.clone();
                        types.insert(name.clone(), t);
                    }
                    (None, _) => {}
                    (Some((name, _)), None) => {
                        return Err(ctx.type_err(
                            bi,
                            ii,
                            format!("'{}' produces no value for '{name}'", ins.op.mnemonic()),
                        ));
                    }
                }
            } else {
                let term = &mut f.blocks[bi].term;
                let terr = |m: String| ctx.type_err(bi, ii, m);
                match term {
                    Terminator::Ret(None) => {
                        if ret_ty != IrType::Unit {
                            return Err(terr(format!(
                                "'ret' without a value in a function returning {ret_ty}"
                            )));
                        }
                    }
                    Terminator::Ret(Some(v)) => {
                        if ret_ty == IrType::Unit {
                            return Err(terr("value returned from a unit function".into()));
                        }
                        let t = operand_type(v, Some(&ret_ty), &types).map_err(terr)?;
                        // an optional return accepts its payload (implicit Some)
                        if t != ret_ty && &t != ret_ty.unwrap_optional() {
                            return Err(terr(format!("returned {t}, expected {ret_ty}")));
                        }
                    }
                    Terminator::Jmp(l) => {
                        if !block_labels.contains(l.as_str()) {
                            return Err(terr(format!("unknown label '{l}'")));
                        }
                    }
                    Terminator::Br {
                        cond,
                        then_label,
                        else_label,
                    } => {
                        let t = operand_type(cond, Some(&IrType::Int(1)), &types).map_err(terr)?;
                        if t != IrType::Int(1) {
                            return Err(terr(format!(
                                "branch condition has type {t}, expected i1"
                            )));
                        }
                        for l in [then_label, else_label] {
                            if !block_labels.contains(l.as_str()) {
                                return Err(terr(format!("unknown label '{l}'")));
                            }
                        }
                    }
                    Terminator::Panic(_) => {}
                }
            }
        }
    }
    Ok(())
}

/// Slice and vector values are handles to an in-memory header; they are
/// reached with `field-addr`, never loaded or stored whole.
fn is_handle(t: &IrType) -> bool {
    matches!(t.unwrap_optional(), IrType::StrSlice | IrType::ByteVec)
}

/// Resolves the type of an operand, masking literals to `expected`.
fn operand_type(
    o: &mut Operand,
    expected: Option<&IrType>,
    types: &HashMap<String, IrType>,
) -> Result<IrType, String> {
    match o {
        Operand::Value(n) => types
            .get(n)
            .cloned()
            .ok_or_else(|| format!("undefined value '{n}'")),
        Operand::Lit(v) => match expected {
            Some(IrType::Int(w)) => {
                *v = mask(*v, *w);
                Ok(IrType::Int(*w))
            }
            Some(t) => Err(format!("integer literal used where {t} is expected")),
            None => Err("cannot infer the width of a literal here".into()),
        },
        Operand::Null => match expected {
            Some(t) if t.is_pointer_like() => Ok(t.clone()),
            Some(t) => Err(format!("null used where {t} is expected")),
            None => Err("cannot infer the type of null here".into()),
        },
    }
}

/// Types a pair of operands that must agree.
fn pair_types(
    lhs: &mut Operand,
    rhs: &mut Operand,
    types: &HashMap<String, IrType>,
) -> Result<IrType, String> {
    let anchor = match (&*lhs, &*rhs) {
        (Operand::Value(n), _) | (_, Operand::Value(n)) => types
            .get(n)
            .cloned()
            .ok_or_else(|| format!("undefined value '{n}'"))?,
        _ => return Err("at least one operand must be a named value".into()),
    };
    let a = operand_type(lhs, Some(&anchor), types)?;
    let b = operand_type(rhs, Some(&anchor), types)?;
    if a != b {
        return Err(format!("operand types differ: {a} vs {b}"));
    }
    Ok(a)
}

fn int_operand(o: &mut Operand, types: &HashMap<String, IrType>) -> Result<u32, String> {
    let t = operand_type(o, Some(&IrType::Int(64)), types)?;
    t.int_width()
        .ok_or_else(|| format!("expected an integer, found {t}"))
}

fn infer(
    op: &mut Op,
    types: &HashMap<String, IrType>,
    records: &RecordTable,
    dialect: Dialect,
) -> Result<Option<IrType>, String> {
    let _ = dialect;
    Ok(match op {
        Op::Const { ty, value } => {
            let Some(w) = ty.int_width() else {
                return Err(format!("const of non-integer type {ty}"));
            };
            *value = mask(*value, w);
            Some(ty.clone())
        }
        Op::Bin { lhs, rhs, .. } | Op::Checked { lhs, rhs, .. } => {
            let t = pair_types(lhs, rhs, types)?;
            if t.int_width().is_none() {
                return Err(format!("arithmetic on non-integer type {t}"));
            }
            Some(t)
        }
        Op::Icmp { pred, lhs, rhs } => {
            let t = pair_types(lhs, rhs, types)?;
            if t.int_width().is_none() && !t.is_pointer_like() {
                return Err(format!("icmp {} on {t}", pred.mnemonic()));
            }
            Some(IrType::Int(1))
        }
        Op::Cast { kind, to, value } => {
            let src = match value {
                Operand::Value(_) => operand_type(value, None, types)?,
                _ => return Err("cast operand must be a named value".into()),
            };
            let Some(sw) = src.int_width() else {
                return Err(format!("cast of non-integer {src}"));
            };
            if !INT_WIDTHS.contains(to) {
                return Err(format!("unsupported integer width {to}"));
            }
            match kind {
                CastKind::ZExt | CastKind::SExt if *to <= sw => {
                    return Err(format!(
                        "{} from i{sw} to i{to} must widen",
                        kind.mnemonic()
                    ))
                }
                CastKind::Trunc if *to >= sw => {
                    return Err(format!("trunc from i{sw} to i{to} must narrow"))
                }
                _ => {}
            }
            Some(IrType::Int(*to))
        }
        Op::Alloc { ty } => {
            check_type(ty, records)?;
            if matches!(ty, IrType::Unit) {
                return Err("alloc of unit".into());
            }
            Some(IrType::ptr(ty.clone()))
        }
        Op::Load { ty, ptr } => {
            check_type(ty, records)?;
            let pt = operand_type(ptr, None, types)?;
            if !matches!(pt, IrType::Address(_)) {
                return Err(format!("load through non-address {pt}"));
            }
            if ty.int_width().is_none() && !ty.is_pointer_like() || is_handle(ty) {
                return Err(format!("load of non-scalar type {ty}"));
            }
            Some(ty.clone())
        }
        Op::Store { value, ptr } => {
            let pt = operand_type(ptr, None, types)?;
            let IrType::Address(pointee) = pt else {
                return Err(format!("store through non-address {pt}"));
            };
            let vt = operand_type(value, Some(&pointee), types)?;
            if vt.int_width().is_none() && !vt.is_pointer_like() || is_handle(&vt) {
                return Err(format!("store of non-scalar type {vt}"));
            }
            None
        }
        Op::FieldAddr { base, field } => {
            let bt = operand_type(base, None, types)?;
            let target = match &bt {
                IrType::Address(inner) => inner.as_ref().clone(),
                IrType::StrSlice | IrType::ByteVec => bt.clone(),
                other => return Err(format!("field-addr on {other}")),
            };
            let (_, fty) = field_offset(&target, field, records)
                .ok_or_else(|| format!("{target} has no field '{field}'"))?;
            Some(IrType::ptr(fty))
        }
        Op::IndexAddr { base, index } => {
            let bt = operand_type(base, None, types)?;
            int_operand(index, types)?;
            match bt {
                IrType::Address(inner) => match *inner {
                    IrType::Array(elem, _) => Some(IrType::Address(elem)),
                    other => Some(IrType::ptr(other)),
                },
                other => return Err(format!("index-addr on {other}")),
            }
        }
        Op::BoundsCheckedIndex { base, index } => {
            let bt = operand_type(base, None, types)?;
            int_operand(index, types)?;
            match bt {
                IrType::StrSlice | IrType::ByteVec => Some(IrType::ptr(IrType::Int(8))),
                IrType::Address(inner) => match *inner {
                    IrType::Array(elem, _) => Some(IrType::Address(elem)),
                    IrType::StrSlice | IrType::ByteVec => Some(IrType::ptr(IrType::Int(8))),
                    other => return Err(format!("bounds-checked-index on *{other}")),
                },
                other => return Err(format!("bounds-checked-index on {other}")),
            }
        }
        Op::OptionUnwrap { value } => {
            let t = operand_type(value, None, types)?;
            match t {
                IrType::Optional(inner) => Some(*inner),
                other => return Err(format!("option-unwrap on non-optional {other}")),
            }
        }
        Op::Call { ret, args, .. } => {
            check_type(ret, records)?;
            for a in args.iter_mut() {
                if let Operand::Lit(_) = a {
                    operand_type(a, Some(&IrType::Int(64)), types)?;
                } else if let Operand::Value(_) = a {
                    operand_type(a, None, types)?;
                }
            }
            if ret.int_width().is_none() && !ret.is_pointer_like() && *ret != IrType::Unit {
                return Err(format!("call returning non-scalar {ret}"));
            }
            if *ret == IrType::Unit {
                None
            } else {
                Some(ret.clone())
            }
        }
    })
}
