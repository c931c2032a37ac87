// SPDX-License-Identifier: Apache-2.0

//! Per-output comparison of two aligned sides and the resulting report.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ged::{first_difference, ged_with, GedConfig};
use super::merge::{guarded_values, merge_paths, GuardedValue};
use super::render::{infix, Names};
use crate::symexec::{BinKind, ExprKind, SymExpr, Terminal, UnOp};
use crate::symgraph::{AlignedSide, NormRules, SymGraph};

/// Report schema version.
pub const REPORT_VERSION: u32 = 1;

const MAX_BINDING_DIAGNOSTICS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub rules: NormRules,
    pub ged: GedConfig,
    /// Compare path by path instead of over the merged expression.
    pub per_path: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equivalent,
    Divergent,
    /// The search ran out of budget before separating the graphs.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SidePair<T> {
    pub c: T,
    pub rust: T,
}

/// A pointer-valued return of the shape `base + k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnOffset {
    pub base: String,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputReport {
    pub output: String,
    /// Content hash of the compared graph, if the side binds the output.
    pub c_graph: Option<String>,
    pub rust_graph: Option<String>,
    pub distance: u32,
    pub lower_bound: u32,
    pub equivalent: bool,
    /// The distance is an upper bound rather than exact.
    pub approximate: bool,
    pub verdict: Verdict,
    pub reason: Option<String>,
    pub diagnostics: Vec<String>,
    /// Smallest constant offset over the return paths, per side.
    pub min_return_offset: Option<SidePair<Option<ReturnOffset>>>,
    #[serde(skip)]
    pub c_expr: Option<SymExpr>,
    #[serde(skip)]
    pub rust_expr: Option<SymExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct S3Report {
    pub version: u32,
    pub function: String,
    pub outputs: Vec<OutputReport>,
    /// Sum of the per-output distances.
    pub distance: u32,
    pub equivalent: bool,
    pub approximate: bool,
    pub outputs_total: usize,
    pub outputs_equivalent: usize,
    /// Panicking paths by code.
    pub safety_paths: SidePair<BTreeMap<String, usize>>,
    pub exhausted_paths: SidePair<usize>,
    pub incomplete: SidePair<bool>,
}

impl S3Report {
    /// Fixed-width text table, one line per output.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<24} {:<20} {:>8} {:>6}  {:<11} note\n",
            "function", "output", "distance", "lb", "verdict"
        );
        for o in &self.outputs {
            let verdict = match o.verdict {
                Verdict::Equivalent => "equivalent",
                Verdict::Divergent => "divergent",
                Verdict::Unknown => "unknown",
            };
            let mark = if o.approximate { "~" } else { "" };
            let note = o
                .reason
                .clone()
                .or_else(|| o.diagnostics.first().cloned())
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{:<24} {:<20} {:>8} {:>6}  {:<11} {note}",
                self.function,
                o.output,
                format!("{mark}{}", o.distance),
                o.lower_bound,
                verdict
            );
        }
        let _ = writeln!(
            s,
            "{}: {}/{} outputs equivalent",
            self.function, self.outputs_equivalent, self.outputs_total
        );
        s
    }
}

fn graph_id(e: &SymExpr) -> String {
    format!("{:016x}", e.hash_value())
}

fn graph_of(e: Option<&SymExpr>) -> SymGraph {
    e.map(SymGraph::from_expr).unwrap_or_default()
}

fn names(side: &AlignedSide) -> Names<'_> {
    Names {
        params: &side.param_names,
        leaves: Some(&side.leaf_names),
    }
}

/// Strips one negation so that a condition and its complement share a key.
fn polarity_free(e: &SymExpr) -> SymExpr {
    match e.kind() {
        ExprKind::Unary(UnOp::Not, a) if e.width() == 1 => a.clone(),
        _ => e.clone(),
    }
}

/// Branch conditions that only one side tests.
fn one_sided_guards(
    c: &[GuardedValue],
    r: &[GuardedValue],
    cs: &AlignedSide,
    rs: &AlignedSide,
) -> Vec<String> {
    let keys = |vs: &[GuardedValue]| -> Vec<SymExpr> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for a in vs.iter().flat_map(|g| g.atoms.iter()).map(polarity_free) {
            if seen.insert(a.clone()) {
                out.push(a);
            }
        }
        out
    };
    let (kc, kr) = (keys(c), keys(r));
    let sc: HashSet<&SymExpr> = kc.iter().collect();
    let sr: HashSet<&SymExpr> = kr.iter().collect();
    let mut out = Vec::new();
    for a in kc.iter().filter(|a| !sr.contains(a)) {
        out.push(format!("guard only in c: {}", infix(a, &names(cs))));
    }
    for a in kr.iter().filter(|a| !sc.contains(a)) {
        out.push(format!("guard only in rust: {}", infix(a, &names(rs))));
    }
    out
}

/// Paths of the two sides that share a guard.
fn pair_by_guard<'a>(
    c: &'a [GuardedValue],
    r: &'a [GuardedValue],
) -> (
    Vec<(&'a GuardedValue, &'a GuardedValue)>,
    Vec<&'a GuardedValue>,
) {
    let mut used = vec![false; r.len()];
    let mut pairs = Vec::new();
    let mut left = Vec::new();
    for g in c {
        match (0..r.len()).find(|&j| !used[j] && r[j].guard == g.guard) {
            Some(j) => {
                used[j] = true;
                pairs.push((g, &r[j]));
            }
            None => left.push(g),
        }
    }
    left.extend(r.iter().zip(&used).filter(|(_, u)| !**u).map(|(g, _)| g));
    (pairs, left)
}

fn binding_differences(
    c: &[GuardedValue],
    r: &[GuardedValue],
    output: &str,
    cs: &AlignedSide,
    rs: &AlignedSide,
) -> Vec<String> {
    pair_by_guard(c, r)
        .0
        .into_iter()
        .filter(|(a, b)| a.value != b.value)
        .take(MAX_BINDING_DIAGNOSTICS)
        .map(|(a, b)| {
            format!(
                "when {}: c binds {output} = {}, rust binds {output} = {}",
                infix(&a.guard, &names(cs)),
                infix(&a.value, &names(cs)),
                infix(&b.value, &names(rs))
            )
        })
        .collect()
}

fn as_offset(e: &SymExpr) -> Option<(String, u64)> {
    match e.kind() {
        ExprKind::Sym(b) => Some((b.clone(), 0)),
        ExprKind::Binary(BinKind::Add, x, y) => match (x.kind(), y.kind()) {
            (ExprKind::Sym(b), ExprKind::Const(k)) | (ExprKind::Const(k), ExprKind::Sym(b)) => {
                Some((b.clone(), *k))
            }
            _ => None,
        },
        _ => None,
    }
}

fn min_offset(vals: &[GuardedValue], side: &AlignedSide) -> Option<ReturnOffset> {
    vals.iter()
        .filter_map(|g| as_offset(&g.value))
        .min_by_key(|(b, k)| (*k, b.clone()))
        .map(|(b, offset)| ReturnOffset {
            base: names(side)
                .params
                .iter()
                .enumerate()
                .fold(b.clone(), |acc, (i, n)| {
                    if acc == format!("arg{i}") && !n.is_empty() {
                        n.clone()
                    } else {
                        acc
                    }
                }),
            offset,
        })
}

fn missing(output: &str, c: Option<&SymExpr>, r: Option<&SymExpr>, reason: String) -> OutputReport {
    let d = ged_with(&graph_of(c), &graph_of(r), &GedConfig::default()).distance;
    OutputReport {
        output: output.to_string(),
        c_graph: c.map(graph_id),
        rust_graph: r.map(graph_id),
        distance: d,
        lower_bound: d.max(1),
        equivalent: false,
        approximate: false,
        verdict: Verdict::Divergent,
        reason: Some(reason),
        diagnostics: Vec::new(),
        min_return_offset: None,
        c_expr: c.cloned(),
        rust_expr: r.cloned(),
    }
}

fn score_output(
    output: &str,
    cs: &AlignedSide,
    rs: &AlignedSide,
    cfg: &ScoreConfig,
) -> OutputReport {
    let cm = merge_paths(cs, output, &cfg.rules);
    let rm = merge_paths(rs, output, &cfg.rules);
    for (side, name) in [(cs, "c"), (rs, "rust")] {
        if let Some(why) = side.failures.get(output) {
            return missing(
                output,
                cm.as_ref(),
                rm.as_ref(),
                format!("alignment failed on {name}: {why}"),
            );
        }
    }
    let in_c = cs.slots.contains_key(output) || (output == "ret" && cs.declares_ret);
    let in_r = rs.slots.contains_key(output) || (output == "ret" && rs.declares_ret);
    if !in_c || !in_r {
        let side = if in_c { "rust" } else { "c" };
        return missing(
            output,
            cm.as_ref(),
            rm.as_ref(),
            format!("missing-output: {side} never writes {output}"),
        );
    }
    let (cm, rm) = match (cm, rm) {
        (Some(a), Some(b)) => (a, b),
        (None, None) => {
            return OutputReport {
                output: output.to_string(),
                c_graph: None,
                rust_graph: None,
                distance: 0,
                lower_bound: 0,
                equivalent: true,
                approximate: false,
                verdict: Verdict::Equivalent,
                reason: Some("no return path on either side".into()),
                diagnostics: Vec::new(),
                min_return_offset: None,
                c_expr: None,
                rust_expr: None,
            }
        }
        (a, b) => {
            let side = if a.is_none() { "c" } else { "rust" };
            return missing(
                output,
                a.as_ref(),
                b.as_ref(),
                format!("no return path on {side}"),
            );
        }
    };
    let cv = guarded_values(cs, output, &cfg.rules);
    let rv = guarded_values(rs, output, &cfg.rules);
    let (ga, gb) = (SymGraph::from_expr(&cm), SymGraph::from_expr(&rm));
    let (distance, lower_bound, exact, diff) = if cfg.per_path {
        let (pairs, left) = pair_by_guard(&cv, &rv);
        let (mut d, mut lb, mut exact) = (0u32, 0u32, true);
        for (a, b) in pairs {
            let g = ged_with(
                &SymGraph::from_expr(&a.value),
                &SymGraph::from_expr(&b.value),
                &cfg.ged,
            );
            d += g.distance;
            lb += g.lower_bound;
            exact &= g.exact;
        }
        for g in left {
            let x = ged_with(
                &SymGraph::from_expr(&g.value),
                &SymGraph::default(),
                &cfg.ged,
            )
            .distance;
            d += x;
            lb += x;
        }
        let whole = ged_with(&ga, &gb, &cfg.ged);
        (d, lb, exact, first_difference(&ga, &gb, &whole.mapping))
    } else {
        let g = ged_with(&ga, &gb, &cfg.ged);
        let diff = first_difference(&ga, &gb, &g.mapping);
        (g.distance, g.lower_bound, g.exact, diff)
    };
    let verdict = if distance == 0 {
        Verdict::Equivalent
    } else if lower_bound >= 1 {
        Verdict::Divergent
    } else {
        Verdict::Unknown
    };
    let mut diagnostics = Vec::new();
    let mut min_return_offset = None;
    if verdict != Verdict::Equivalent {
        if let Some((a, b)) = diff {
            let show = |l: Option<String>| {
                l.map(|l| format!("[{l}]"))
                    .unwrap_or_else(|| "nothing".into())
            };
            diagnostics.push(format!(
                "first difference: c {} vs rust {}",
                show(a),
                show(b)
            ));
        }
        diagnostics.extend(one_sided_guards(&cv, &rv, cs, rs));
        diagnostics.extend(binding_differences(&cv, &rv, output, cs, rs));
        if output == "ret" && cm.width() == 64 {
            let (oc, or) = (min_offset(&cv, cs), min_offset(&rv, rs));
            if oc.is_some() || or.is_some() {
                let show = |o: &Option<ReturnOffset>| match o {
                    Some(o) => format!("{} + {}", o.base, o.offset),
                    None => "none".into(),
                };
                if oc != or {
                    diagnostics.push(format!(
                        "minimum return offset: c {}, rust {}",
                        show(&oc),
                        show(&or)
                    ));
                }
                min_return_offset = Some(SidePair { c: oc, rust: or });
            }
        }
    }
    OutputReport {
        output: output.to_string(),
        c_graph: Some(graph_id(&cm)),
        rust_graph: Some(graph_id(&rm)),
        distance,
        lower_bound,
        equivalent: verdict == Verdict::Equivalent,
        approximate: !exact,
        verdict,
        reason: None,
        diagnostics,
        min_return_offset,
        c_expr: Some(cm),
        rust_expr: Some(rm),
    }
}

fn panic_counts(side: &AlignedSide) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in &side.paths {
        if let Terminal::Panic(code) = &p.terminal {
            *m.entry(code.clone()).or_insert(0) += 1;
        }
    }
    m
}

/// Outputs compared for a pair of sides: `ret` when either side returns a
/// value, then every written location in name order.
pub fn compared_outputs(c: &AlignedSide, r: &AlignedSide) -> Vec<String> {
    let mut set: BTreeSet<String> = c.slots.keys().chain(r.slots.keys()).cloned().collect();
    let has_ret = c.declares_ret || r.declares_ret || set.contains("ret");
    set.remove("ret");
    has_ret
        .then(|| "ret".to_string())
        .into_iter()
        .chain(set)
        .collect()
}

/// Scores the C side against the Rust side of one function.
pub fn score_function(
    c: &AlignedSide,
    r: &AlignedSide,
    function: &str,
    cfg: &ScoreConfig,
) -> S3Report {
    let outputs: Vec<OutputReport> = compared_outputs(c, r)
        .par_iter()
        .map(|o| score_output(o, c, r, cfg))
        .collect();
    let outputs_equivalent = outputs.iter().filter(|o| o.equivalent).count();
    S3Report {
        version: REPORT_VERSION,
        function: function.to_string(),
        distance: outputs.iter().map(|o| o.distance).sum(),
        equivalent: outputs_equivalent == outputs.len(),
        approximate: outputs.iter().any(|o| o.approximate),
        outputs_total: outputs.len(),
        outputs_equivalent,
        outputs,
        safety_paths: SidePair {
            c: panic_counts(c),
            rust: panic_counts(r),
        },
        exhausted_paths: SidePair {
            c: c.paths
                .iter()
                .filter(|p| p.terminal == Terminal::Exhausted)
                .count(),
            rust: r
                .paths
                .iter()
                .filter(|p| p.terminal == Terminal::Exhausted)
                .count(),
        },
        incomplete: SidePair {
            c: c.incomplete,
            rust: r.incomplete,
        },
    }
}
