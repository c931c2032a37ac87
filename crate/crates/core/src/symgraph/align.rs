// SPDX-License-Identifier: Apache-2.0

//! Output alignment: makes the outputs of both dialects comparable.
//!
//! Optional wrappers are layout-transparent, so unwrapping is the identity
//! on values. A string slice or byte vector is compared through its data
//! buffer: its data pointer, length and capacity words are dropped and the
//! buffer elements are compared instead. Buffer elements are compared from
//! index 0 up to the largest index written on any path.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::mir::{Dialect, IrFunction, IrType, RecordTable};
use crate::symexec::{fold, Constraint, ExecResult, PathSummary, SymExpr, Terminal, UnOp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignStep {
    UnwrapOptional,
    ProjectSliceData,
    ProjectVectorData,
    Dereference,
    Field(String),
}

/// Projection steps per output root: `ret`, or an access path such as
/// `arg0.buf` naming the wrapper to project.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentSpec {
    #[serde(default)]
    pub outputs: BTreeMap<String, Vec<AlignStep>>,
}

fn wrapper_steps(
    ty: &IrType,
    records: &RecordTable,
    key: String,
    steps: Vec<AlignStep>,
    out: &mut BTreeMap<String, Vec<AlignStep>>,
    depth: u32,
) {
    if depth > 8 {
        return;
    }
    match ty {
        IrType::Optional(inner) => {
            let mut s = steps;
            s.push(AlignStep::UnwrapOptional);
            wrapper_steps(inner, records, key.clone(), s.clone(), out, depth);
            out.entry(key).or_insert(s);
        }
        IrType::StrSlice | IrType::ByteVec => {
            let mut s = steps;
            s.push(if matches!(ty, IrType::StrSlice) {
                AlignStep::ProjectSliceData
            } else {
                AlignStep::ProjectVectorData
            });
            out.insert(key, s);
        }
        IrType::Record(name) => {
            let Some(def) = records.get(name) else { return };
            for (f, fty) in &def.fields {
                let mut s = steps.clone();
                s.push(AlignStep::Field(f.clone()));
                wrapper_steps(fty, records, format!("{key}.{f}"), s, out, depth + 1);
            }
        }
        _ => {}
    }
}

impl AlignmentSpec {
    /// Steps implied by the declared types of a rust-dialect function; empty
    /// for the c dialect, whose outputs pass through unchanged.
    pub fn for_function(f: &IrFunction, records: &RecordTable) -> AlignmentSpec {
        let mut outputs = BTreeMap::new();
        if f.dialect == Dialect::C {
            return AlignmentSpec { outputs };
        }
        wrapper_steps(&f.ret, records, "ret".into(), Vec::new(), &mut outputs, 0);
        for (i, p) in f.params.iter().enumerate() {
            if !p.out {
                continue;
            }
            match p.ty.unwrap_optional() {
                IrType::Address(inner) => {
                    let mut steps = Vec::new();
                    if matches!(p.ty, IrType::Optional(_)) {
                        steps.push(AlignStep::UnwrapOptional);
                    }
                    steps.push(AlignStep::Dereference);
                    wrapper_steps(inner, records, format!("arg{i}"), steps, &mut outputs, 0);
                }
                t @ (IrType::StrSlice | IrType::ByteVec) => {
                    let suffix = if matches!(t, IrType::StrSlice) {
                        "slice"
                    } else {
                        "vec"
                    };
                    wrapper_steps(
                        t,
                        records,
                        format!("arg{i}.{suffix}"),
                        Vec::new(),
                        &mut outputs,
                        0,
                    );
                }
                _ => {}
            }
        }
        AlignmentSpec { outputs }
    }

    fn projects(&self, key: &str) -> bool {
        self.outputs.get(key).is_some_and(|s| {
            s.iter().any(|st| {
                matches!(
                    st,
                    AlignStep::ProjectSliceData | AlignStep::ProjectVectorData
                )
            })
        })
    }

    /// Whether a binding is a wrapper word (data pointer, length, capacity)
    /// of a projected output.
    fn drops(&self, path: &str) -> bool {
        ["data", "len", "cap"].iter().any(|w| {
            path.strip_suffix(w)
                .and_then(|p| p.strip_suffix('.'))
                .is_some_and(|k| self.projects(k))
        })
    }
}

/// One compared output of a side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSlot {
    pub path: String,
    pub width: u32,
    /// Value for paths that leave the output untouched (`None` for `ret`).
    pub fill: Option<SymExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPath {
    pub constraints: Vec<Constraint>,
    pub terminal: Terminal,
    pub values: BTreeMap<String, SymExpr>,
}

/// All paths of one side with outputs projected for comparison.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignedSide {
    pub slots: BTreeMap<String, OutputSlot>,
    pub paths: Vec<AlignedPath>,
    /// Outputs whose projection failed, with the reason.
    pub failures: BTreeMap<String, String>,
    /// Source names of the parameters, if known.
    pub param_names: Vec<String>,
    /// Access paths of memory leaves by (region, offset), for diagnostics.
    pub leaf_names: BTreeMap<(String, u64), String>,
    /// The function has a return value.
    pub declares_ret: bool,
    pub incomplete: bool,
}

impl AlignedSide {
    /// Value of `path` on a path, or the fill-in when the path leaves it
    /// untouched.
    pub fn value(&self, p: &AlignedPath, path: &str) -> Option<SymExpr> {
        p.values
            .get(path)
            .cloned()
            .or_else(|| self.slots.get(path).and_then(|s| s.fill.clone()))
    }
}

/// Initial contents of `w` bits at `offset` in a symbolic region.
pub fn initial_read(region: &str, offset: u64, w: u32) -> SymExpr {
    let bytes = w.div_ceil(8) * 8;
    let r = SymExpr::read(region, SymExpr::constant(offset, 64), bytes);
    if bytes == w {
        r
    } else {
        fold::unary(UnOp::Trunc, r, w)
    }
}

/// Splits `prefix[k]` into `(prefix, k)`.
fn element_index(path: &str) -> Option<(&str, u64)> {
    let body = path.strip_suffix(']')?;
    let (prefix, k) = body.rsplit_once('[')?;
    Some((prefix, k.parse().ok()?))
}

/// Aligns summaries. `initial` supplies untouched-output fill values where
/// known; otherwise the fill is a read of the region's initial contents.
pub fn align_summaries(
    summaries: &[PathSummary],
    spec: &AlignmentSpec,
    initial: &BTreeMap<String, SymExpr>,
) -> AlignedSide {
    let mut slots: BTreeMap<String, OutputSlot> = BTreeMap::new();
    let mut failures = BTreeMap::new();
    // (region, element width) -> (path prefix, base offset, max index)
    let mut buffers: BTreeMap<(String, String, u32), (u64, u64)> = BTreeMap::new();
    let mut paths = Vec::new();
    for s in summaries {
        let mut values = BTreeMap::new();
        if let Some(r) = &s.ret {
            if spec.projects("ret") && r.width() != 64 {
                failures.insert(
                    "ret".to_string(),
                    format!("data projection of a {}-bit value", r.width()),
                );
            }
            values.insert("ret".to_string(), r.clone());
            slots.entry("ret".into()).or_insert(OutputSlot {
                path: "ret".into(),
                width: r.width(),
                fill: None,
            });
        }
        for o in &s.outputs {
            if spec.drops(&o.path) {
                continue;
            }
            let w = o.value.width();
            values.insert(o.path.clone(), o.value.clone());
            slots.entry(o.path.clone()).or_insert_with(|| OutputSlot {
                path: o.path.clone(),
                width: w,
                fill: Some(
                    initial
                        .get(&o.path)
                        .cloned()
                        .unwrap_or_else(|| initial_read(&o.region, o.offset, w)),
                ),
            });
            if let Some((prefix, k)) = element_index(&o.path) {
                let stride = u64::from(w.div_ceil(8));
                if let Some(base) = o.offset.checked_sub(k * stride) {
                    let e = buffers
                        .entry((o.region.clone(), prefix.to_string(), w))
                        .or_insert((base, 0));
                    e.1 = e.1.max(k);
                }
            }
        }
        paths.push(AlignedPath {
            constraints: s.constraints.clone(),
            terminal: s.terminal.clone(),
            values,
        });
    }
    for ((region, prefix, w), (base, max)) in buffers {
        let stride = u64::from(w.div_ceil(8));
        for k in 0..=max {
            let path = format!("{prefix}[{k}]");
            slots.entry(path.clone()).or_insert_with(|| OutputSlot {
                path: path.clone(),
                width: w,
                fill: Some(
                    initial
                        .get(&path)
                        .cloned()
                        .unwrap_or_else(|| initial_read(&region, base + k * stride, w)),
                ),
            });
        }
    }
    let mut leaf_names = BTreeMap::new();
    for s in summaries {
        for o in &s.outputs {
            leaf_names.insert((o.region.clone(), o.offset), o.path.clone());
        }
    }
    let declares_ret = summaries.iter().any(|s| s.ret.is_some());
    AlignedSide {
        slots,
        paths,
        failures,
        param_names: Vec::new(),
        leaf_names,
        declares_ret,
        incomplete: false,
    }
}

/// Aligns the result of one execution.
pub fn align_result(res: &ExecResult, spec: &AlignmentSpec) -> AlignedSide {
    let mut side = align_summaries(&res.summaries, spec, &res.initial);
    side.param_names = res.param_names.clone();
    side.leaf_names
        .extend(res.leaf_names.iter().map(|(k, v)| (k.clone(), v.clone())));
    side.declares_ret = res.ret_type != crate::mir::IrType::Unit;
    side.incomplete = res.incomplete;
    side
}

/// Output names present on either side.
pub fn output_union(a: &AlignedSide, b: &AlignedSide) -> BTreeSet<String> {
    a.slots.keys().chain(b.slots.keys()).cloned().collect()
}
