// SPDX-License-Identifier: Apache-2.0

//! Exhaustive feasibility oracle.
//!
//! Constraints are split into independent groups (no shared input
//! variables). A group whose variables total at most the configured number
//! of bits is decided by enumerating every valuation; a larger group is
//! `Unknown`, which callers treat as feasible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eval::{collect_vars, Tape, Valuation, VarKey};
use super::expr::SymExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Unknown,
}

/// Searches a group exhaustively. `Ok(None)` means infeasible.
fn search(group: &[SymExpr], max_bits: u32) -> Result<Option<Valuation>, ()> {
    let tape = Tape::compile(group).ok_or(())?;
    let bits: u32 = tape.vars().iter().map(|(_, w)| *w).sum();
    if bits > max_bits {
        return Err(());
    }
    let widths: Vec<u32> = tape.vars().iter().map(|(_, w)| *w).collect();
    let total: u64 = 1u64 << bits;
    let mut values = vec![0u64; widths.len()];
    let mut scratch = Vec::new();
    for n in 0..total {
        let mut rest = n;
        for (v, w) in values.iter_mut().zip(&widths) {
            *v = rest & ((1u64 << w) - 1);
            rest >>= w;
        }
        tape.run(&values, &mut scratch);
        if (0..group.len()).all(|i| tape.root_value(&scratch, i) == 1) {
            let mut val = Valuation::new();
            for ((k, _), v) in tape.vars().iter().zip(&values) {
                val.set(k.clone(), *v);
            }
            return Ok(Some(val));
        }
    }
    Ok(None)
}

/// Partitions constraints into groups that share no variables. Constraints
/// whose variable set is unbounded are returned separately.
fn partition(constraints: &[SymExpr]) -> (Vec<Vec<SymExpr>>, Vec<SymExpr>) {
    let mut unbounded = Vec::new();
    let mut groups: Vec<(BTreeMap<VarKey, u32>, Vec<SymExpr>)> = Vec::new();
    for c in constraints {
        let Some(vars) = collect_vars(std::slice::from_ref(c)) else {
            unbounded.push(c.clone());
            continue;
        };
        let mut merged_vars = vars;
        let mut merged = vec![c.clone()];
        let mut i = 0;
        while i < groups.len() {
            if groups[i].0.keys().any(|k| merged_vars.contains_key(k)) {
                let (v, cs) = groups.swap_remove(i);
                merged_vars.extend(v);
                merged.extend(cs);
            } else {
                i += 1;
            }
        }
        groups.push((merged_vars, merged));
    }
    (groups.into_iter().map(|(_, cs)| cs).collect(), unbounded)
}

/// Decides satisfiability of the conjunction of width-1 `constraints`.
pub fn check_feasible(constraints: &[SymExpr], max_bits: u32) -> Feasibility {
    let mut pending = Vec::new();
    for c in constraints {
        debug_assert_eq!(c.width(), 1);
        match c.as_const() {
            Some(0) => return Feasibility::Infeasible,
            Some(_) => {}
            None => pending.push(c.clone()),
        }
    }
    let (groups, unbounded) = partition(&pending);
    let mut unknown = !unbounded.is_empty();
    for g in groups {
        match search(&g, max_bits) {
            Ok(None) => return Feasibility::Infeasible,
            Ok(Some(_)) => {}
            Err(()) => unknown = true,
        }
    }
    if unknown {
        Feasibility::Unknown
    } else {
        Feasibility::Feasible
    }
}

/// Checks `existing ∧ new`, given that `existing` is not known infeasible:
/// only the group of constraints connected to `new` is re-examined.
pub fn check_extension(existing: &[SymExpr], new: &SymExpr, max_bits: u32) -> Feasibility {
    match new.as_const() {
        Some(0) => return Feasibility::Infeasible,
        Some(_) => return Feasibility::Feasible,
        None => {}
    }
    let Some(mut vars) = collect_vars(std::slice::from_ref(new)) else {
        return Feasibility::Unknown;
    };
    let mut group = vec![new.clone()];
    let mut used = vec![false; existing.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (i, c) in existing.iter().enumerate() {
            if used[i] {
                continue;
            }
            let Some(cv) = collect_vars(std::slice::from_ref(c)) else {
                used[i] = true;
                continue;
            };
            if cv.keys().any(|k| vars.contains_key(k)) {
                used[i] = true;
                vars.extend(cv);
                group.push(c.clone());
                changed = true;
            }
        }
    }
    check_feasible(&group, max_bits)
}

/// A satisfying valuation when the constraints are small enough to search.
pub fn find_witness(constraints: &[SymExpr], max_bits: u32) -> Option<Valuation> {
    let pending: Vec<SymExpr> = constraints
        .iter()
        .filter(|c| c.as_const().is_none())
        .cloned()
        .collect();
    if constraints.iter().any(|c| c.as_const() == Some(0)) {
        return None;
    }
    search(&pending, max_bits).ok().flatten()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexec::expr::BinKind;

    fn a8() -> SymExpr {
        SymExpr::sym("arg0", 8)
    }

    #[test]
    fn contradiction_is_infeasible() {
        let c = vec![
            SymExpr::binary(BinKind::Eq, a8(), SymExpr::constant(5, 8)),
            SymExpr::binary(BinKind::Ne, a8(), SymExpr::constant(5, 8)),
        ];
        assert_eq!(check_feasible(&c, 16), Feasibility::Infeasible);
    }

    #[test]
    fn empty_conjunction_is_feasible() {
        assert_eq!(check_feasible(&[], 16), Feasibility::Feasible);
    }

    #[test]
    fn witness_by_enumeration() {
        let c = vec![SymExpr::binary(BinKind::Ult, a8(), SymExpr::constant(3, 8))];
        assert_eq!(check_feasible(&c, 16), Feasibility::Feasible);
        let w = find_witness(&c, 16).unwrap();
        assert!(w.get(&VarKey::Symbol("arg0".into())).unwrap() < 3);
    }

    #[test]
    fn wide_groups_are_unknown_but_independent_groups_still_decide() {
        let wide = SymExpr::binary(
            BinKind::Ult,
            SymExpr::sym("x", 32),
            SymExpr::constant(3, 32),
        );
        assert_eq!(
            check_feasible(std::slice::from_ref(&wide), 16),
            Feasibility::Unknown
        );
        let contra = vec![
            wide.clone(),
            SymExpr::binary(BinKind::Eq, a8(), SymExpr::constant(1, 8)),
            SymExpr::binary(BinKind::Eq, a8(), SymExpr::constant(2, 8)),
        ];
        assert_eq!(check_feasible(&contra, 16), Feasibility::Infeasible);
    }

    #[test]
    fn extension_only_examines_connected_constraints() {
        let existing = vec![
            SymExpr::binary(
                BinKind::Ult,
                SymExpr::sym("x", 32),
                SymExpr::constant(3, 32),
            ),
            SymExpr::binary(BinKind::Ult, a8(), SymExpr::constant(3, 8)),
        ];
        let new = SymExpr::binary(BinKind::Eq, a8(), SymExpr::constant(7, 8));
        assert_eq!(
            check_extension(&existing, &new, 16),
            Feasibility::Infeasible
        );
        let ok = SymExpr::binary(BinKind::Eq, a8(), SymExpr::constant(2, 8));
        assert_eq!(check_extension(&existing, &ok, 16), Feasibility::Feasible);
    }
}
