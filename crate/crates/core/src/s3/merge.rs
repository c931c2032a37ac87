// SPDX-License-Identifier: Apache-2.0

//! Guarded merge of per-path output values into one expression.

use crate::symexec::{SymExpr, Terminal};
use crate::symgraph::{
    conjunction, normalize_constraints, normalize_expr, AlignedPath, AlignedSide, NormRules,
};

/// One return path reduced to its normalized guard and output value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardedValue {
    pub atoms: Vec<SymExpr>,
    pub guard: SymExpr,
    pub value: SymExpr,
}

pub(crate) fn guard_of(p: &AlignedPath, rules: &NormRules) -> (Vec<SymExpr>, SymExpr) {
    let atoms = normalize_constraints(&p.constraints, rules);
    let guard = normalize_expr(&conjunction(&atoms), rules);
    (atoms, guard)
}

/// Normalized (guard, value) of `output` on every return path, sorted by
/// guard hash. Paths that end in a panic or exhaust the budget are skipped.
pub fn guarded_values(side: &AlignedSide, output: &str, rules: &NormRules) -> Vec<GuardedValue> {
    let mut out: Vec<GuardedValue> = side
        .paths
        .iter()
        .filter(|p| p.terminal == Terminal::Return)
        .filter_map(|p| {
            let value = side.value(p, output)?;
            let (atoms, guard) = guard_of(p, rules);
            Some(GuardedValue {
                atoms,
                guard,
                value: normalize_expr(&value, rules),
            })
        })
        .collect();
    out.sort_by_key(|g| (g.guard.hash_value(), g.value.hash_value()));
    out
}

/// Folds the return paths into `ite(g1, v1, ite(g2, v2, ... vn))`; a single
/// path yields its value. `None` when no return path binds the output.
pub fn merge_paths(side: &AlignedSide, output: &str, rules: &NormRules) -> Option<SymExpr> {
    let mut vals = guarded_values(side, output, rules);
    let last = vals.pop()?;
    let merged = vals
        .into_iter()
        .rev()
        .fold(last.value, |rest, g| SymExpr::ite(g.guard, g.value, rest));
    Some(normalize_expr(&merged, rules))
}
