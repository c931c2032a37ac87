// SPDX-License-Identifier: Apache-2.0

//! Language-aware normalization.
//!
//! Rules, applied bottom-up to a fixpoint in this order at every node:
//!
//! * `ext_collapse`: cast chains collapse (`trunc(zext x)` back to the
//!   width of `x` is `x`; `zext(trunc x)` likewise when the dropped bits are
//!   known zero; nested extensions merge).
//! * `narrow`: a truncation is pushed through wrapping arithmetic whose
//!   operands are extensions or constants, and comparisons between an
//!   extension and a constant that fits the narrow width are done narrow.
//! * `const_fold`: all-constant nodes are evaluated; `ite` with a constant
//!   condition selects its arm.
//! * `commutative_order`: operands of commutative operations are ordered by
//!   structural hash.
//! * `drop_checks`: safety-check constraints are left out of path guards.
//!
//! Every rule preserves the value of the root under every valuation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::symexec::{
    eval_binary, eval_unary, fold, mask, BinKind, Constraint, ConstraintKind, ExprKind, SymExpr,
    UnOp,
};

use super::graph::SymGraph;

/// Per-rule switches, all on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormRules {
    pub ext_collapse: bool,
    pub narrow: bool,
    pub const_fold: bool,
    pub commutative_order: bool,
    pub drop_checks: bool,
}

impl Default for NormRules {
    fn default() -> Self {
        NormRules {
            ext_collapse: true,
            narrow: true,
            const_fold: true,
            commutative_order: true,
            drop_checks: true,
        }
    }
}

impl NormRules {
    pub fn none() -> NormRules {
        NormRules {
            ext_collapse: false,
            narrow: false,
            const_fold: false,
            commutative_order: false,
            drop_checks: false,
        }
    }
}

/// True when every bit of `e` at or above `w` is known to be zero.
fn high_zero(e: &SymExpr, w: u32) -> bool {
    if w >= e.width() {
        return true;
    }
    match e.kind() {
        ExprKind::Const(v) => *v >> w == 0,
        ExprKind::Unary(UnOp::ZExt, x) => x.width() <= w,
        ExprKind::Binary(BinKind::And, a, b) => high_zero(a, w) || high_zero(b, w),
        ExprKind::Binary(BinKind::Or | BinKind::Xor, a, b) => high_zero(a, w) && high_zero(b, w),
        ExprKind::Binary(BinKind::LShr, _, k) => {
            k.as_const().is_some_and(|k| k >= u64::from(e.width() - w))
        }
        _ => false,
    }
}

fn ext_source(e: &SymExpr, kind: UnOp) -> Option<&SymExpr> {
    match e.kind() {
        ExprKind::Unary(op, x) if *op == kind => Some(x),
        _ => None,
    }
}

fn is_ext_or_const(e: &SymExpr) -> bool {
    matches!(
        e.kind(),
        ExprKind::Const(_) | ExprKind::Unary(UnOp::ZExt | UnOp::SExt, _)
    )
}

fn sign_fits(v: u64, from: u32, to: u32) -> bool {
    eval_unary(UnOp::SExt, mask(v, to), to, from) == v
}

fn ext_collapse(e: &SymExpr) -> Option<SymExpr> {
    let ExprKind::Unary(op, x) = e.kind() else {
        return None;
    };
    let w = e.width();
    match (op, x.kind()) {
        (UnOp::Trunc, ExprKind::Unary(inner @ (UnOp::ZExt | UnOp::SExt), y)) => {
            Some(match y.width().cmp(&w) {
                std::cmp::Ordering::Equal => y.clone(),
                std::cmp::Ordering::Greater => SymExpr::unary(UnOp::Trunc, y.clone(), w),
                std::cmp::Ordering::Less => SymExpr::unary(*inner, y.clone(), w),
            })
        }
        (UnOp::Trunc, ExprKind::Unary(UnOp::Trunc, y)) => {
            Some(SymExpr::unary(UnOp::Trunc, y.clone(), w))
        }
        (UnOp::ZExt, ExprKind::Unary(UnOp::ZExt, y)) => {
            Some(SymExpr::unary(UnOp::ZExt, y.clone(), w))
        }
        (UnOp::SExt, ExprKind::Unary(UnOp::SExt, y)) => {
            Some(SymExpr::unary(UnOp::SExt, y.clone(), w))
        }
        // the sign bit of a proper zero extension is clear
        (UnOp::SExt, ExprKind::Unary(UnOp::ZExt, y)) => {
            Some(SymExpr::unary(UnOp::ZExt, y.clone(), w))
        }
        (UnOp::ZExt, ExprKind::Unary(UnOp::Trunc, y))
            if y.width() == w && high_zero(y, x.width()) =>
        {
            Some(y.clone())
        }
        _ => None,
    }
}

fn narrow(e: &SymExpr) -> Option<SymExpr> {
    match e.kind() {
        ExprKind::Unary(UnOp::Trunc, x) => {
            let w = e.width();
            let t = |a: &SymExpr| SymExpr::unary(UnOp::Trunc, a.clone(), w);
            match x.kind() {
                ExprKind::Binary(
                    op @ (BinKind::Add
                    | BinKind::Sub
                    | BinKind::Mul
                    | BinKind::And
                    | BinKind::Or
                    | BinKind::Xor),
                    a,
                    b,
                ) if is_ext_or_const(a) || is_ext_or_const(b) => {
                    Some(SymExpr::binary(*op, t(a), t(b)))
                }
                ExprKind::Unary(op @ (UnOp::Neg | UnOp::Not), a) if is_ext_or_const(a) => {
                    Some(SymExpr::unary(*op, t(a), w))
                }
                ExprKind::Ite(c, a, b) if is_ext_or_const(a) || is_ext_or_const(b) => {
                    Some(SymExpr::ite(c.clone(), t(a), t(b)))
                }
                _ => None,
            }
        }
        ExprKind::Binary(op, a, b) if op.is_compare() => narrow_compare(*op, a, b),
        _ => None,
    }
}

fn narrow_compare(op: BinKind, a: &SymExpr, b: &SymExpr) -> Option<SymExpr> {
    let unsigned = matches!(op, BinKind::Eq | BinKind::Ne | BinKind::Ult | BinKind::Ule);
    let signed = matches!(op, BinKind::Eq | BinKind::Ne | BinKind::Slt | BinKind::Sle);
    // both sides extended from the same width
    for (kind, ok) in [(UnOp::ZExt, unsigned), (UnOp::SExt, signed)] {
        if let (true, Some(x), Some(y)) = (ok, ext_source(a, kind), ext_source(b, kind)) {
            if x.width() == y.width() {
                return Some(SymExpr::binary(op, x.clone(), y.clone()));
            }
        }
    }
    // extension against a constant, in either operand position
    for (ext, c, ext_left) in [(a, b, true), (b, a, false)] {
        let Some(v) = c.as_const() else { continue };
        for (kind, ok) in [(UnOp::ZExt, unsigned), (UnOp::SExt, signed)] {
            let Some(x) = ext_source(ext, kind).filter(|_| ok) else {
                continue;
            };
            let sw = x.width();
            let fits = if kind == UnOp::ZExt {
                v >> sw == 0
            } else {
                sign_fits(v, c.width(), sw)
            };
            if fits {
                let k = SymExpr::constant(mask(v, sw), sw);
                let (l, r) = if ext_left {
                    (x.clone(), k)
                } else {
                    (k, x.clone())
                };
                return Some(SymExpr::binary(op, l, r));
            }
            if matches!(op, BinKind::Eq | BinKind::Ne) {
                return Some(SymExpr::bool(op == BinKind::Ne));
            }
            if kind == UnOp::ZExt {
                // the constant exceeds every extended value
                return Some(SymExpr::bool(ext_left));
            }
        }
    }
    None
}

fn const_fold(e: &SymExpr) -> Option<SymExpr> {
    match e.kind() {
        ExprKind::Unary(op, a) => a
            .as_const()
            .map(|v| SymExpr::constant(eval_unary(*op, v, a.width(), e.width()), e.width())),
        ExprKind::Binary(op, a, b) => match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Some(SymExpr::constant(
                eval_binary(*op, x, y, a.width()),
                e.width(),
            )),
            _ => None,
        },
        ExprKind::Ite(c, a, b) => c
            .as_const()
            .map(|v| if v == 1 { a.clone() } else { b.clone() }),
        _ => None,
    }
}

fn commutative_order(e: &SymExpr) -> Option<SymExpr> {
    match e.kind() {
        ExprKind::Binary(op, a, b) if op.is_commutative() && a.hash_value() > b.hash_value() => {
            Some(SymExpr::binary(*op, b.clone(), a.clone()))
        }
        _ => None,
    }
}

struct Normalizer {
    rules: NormRules,
    memo: HashMap<SymExpr, SymExpr>,
}

impl Normalizer {
    fn step(&self, e: &SymExpr) -> Option<SymExpr> {
        let r = &self.rules;
        (r.ext_collapse.then(|| ext_collapse(e)).flatten())
            .or_else(|| r.narrow.then(|| narrow(e)).flatten())
            .or_else(|| r.const_fold.then(|| const_fold(e)).flatten())
            .or_else(|| r.commutative_order.then(|| commutative_order(e)).flatten())
    }

    fn norm(&mut self, e: &SymExpr) -> SymExpr {
        if let Some(done) = self.memo.get(e) {
            return done.clone();
        }
        let kids: Vec<SymExpr> = e.children().into_iter().map(|c| self.norm(c)).collect();
        let rebuilt = if kids.iter().zip(e.children()).all(|(k, c)| k == c) {
            e.clone()
        } else {
            e.with_children(kids)
        };
        let out = match self.step(&rebuilt) {
            // the rewrite may expose new redexes below its root
            Some(next) => self.norm(&next),
            None => rebuilt,
        };
        self.memo.insert(e.clone(), out.clone());
        out
    }
}

/// Normal form of one expression.
pub fn normalize_expr(e: &SymExpr, rules: &NormRules) -> SymExpr {
    let mut n = Normalizer {
        rules: *rules,
        memo: HashMap::new(),
    };
    n.norm(e)
}

/// Normal form of every root of a graph.
pub fn normalize(g: &SymGraph, rules: &NormRules) -> Result<SymGraph, String> {
    let mut n = Normalizer {
        rules: *rules,
        memo: HashMap::new(),
    };
    let roots: Vec<SymExpr> = g.to_exprs()?.iter().map(|e| n.norm(e)).collect();
    Ok(SymGraph::from_exprs(&roots))
}

/// Normalized guard atoms of a path, without safety checks when
/// `drop_checks` is on.
pub fn normalize_constraints(cs: &[Constraint], rules: &NormRules) -> Vec<SymExpr> {
    let mut n = Normalizer {
        rules: *rules,
        memo: HashMap::new(),
    };
    cs.iter()
        .filter(|c| !(rules.drop_checks && matches!(c.kind, ConstraintKind::Check(_))))
        .map(|c| n.norm(&c.expr))
        .filter(|e| !(rules.const_fold && e.as_const() == Some(1)))
        .collect()
}

/// Left-nested conjunction; the empty conjunction is true.
pub fn conjunction(atoms: &[SymExpr]) -> SymExpr {
    atoms
        .iter()
        .cloned()
        .reduce(fold::and)
        .unwrap_or_else(|| SymExpr::bool(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexec::{eval_concrete, Valuation};

    fn sym8(n: &str) -> SymExpr {
        SymExpr::sym(n, 8)
    }

    fn agree_on_all_bytes(a: &SymExpr, b: &SymExpr) {
        for x in 0..256u64 {
            let mut v = Valuation::new();
            v.symbol("cp", x).symbol("x", x);
            assert_eq!(
                eval_concrete(a, &v).unwrap(),
                eval_concrete(b, &v).unwrap(),
                "{a} vs {b} at {x}"
            );
        }
    }

    #[test]
    fn widened_add_narrows_back() {
        let cp = sym8("cp");
        let e = SymExpr::unary(
            UnOp::Trunc,
            SymExpr::binary(
                BinKind::Add,
                SymExpr::unary(UnOp::ZExt, cp.clone(), 32),
                SymExpr::constant(40, 32),
            ),
            8,
        );
        let n = normalize_expr(&e, &NormRules::default());
        assert_eq!(
            n,
            SymExpr::binary(BinKind::Add, cp, SymExpr::constant(40, 8))
        );
        agree_on_all_bytes(&e, &n);
    }

    #[test]
    fn commutative_operands_are_ordered() {
        let x = sym8("x");
        let k = SymExpr::constant(3, 8);
        let a = normalize_expr(
            &SymExpr::binary(BinKind::Add, k.clone(), x.clone()),
            &NormRules::default(),
        );
        let b = normalize_expr(&SymExpr::binary(BinKind::Add, x, k), &NormRules::default());
        assert_eq!(a, b);
    }

    #[test]
    fn plain_graphs_are_fixpoints() {
        let e = SymExpr::binary(BinKind::Sub, sym8("x"), sym8("cp"));
        assert_eq!(normalize_expr(&e, &NormRules::default()), e);
    }

    #[test]
    fn compare_against_fitting_constant_is_narrowed() {
        let x = sym8("x");
        let e = SymExpr::binary(
            BinKind::Ult,
            SymExpr::unary(UnOp::ZExt, x.clone(), 32),
            SymExpr::constant(200, 32),
        );
        let n = normalize_expr(&e, &NormRules::default());
        assert_eq!(
            n,
            SymExpr::binary(BinKind::Ult, x.clone(), SymExpr::constant(200, 8))
        );
        let far = SymExpr::binary(
            BinKind::Ult,
            SymExpr::unary(UnOp::ZExt, x, 32),
            SymExpr::constant(300, 32),
        );
        assert_eq!(
            normalize_expr(&far, &NormRules::default()),
            SymExpr::bool(true)
        );
        agree_on_all_bytes(&far, &SymExpr::bool(true));
    }

    #[test]
    fn masked_truncation_round_trip_collapses() {
        let x = SymExpr::sym("x", 32);
        let top = SymExpr::binary(BinKind::LShr, x, SymExpr::constant(24, 32));
        let e = SymExpr::unary(UnOp::ZExt, SymExpr::unary(UnOp::Trunc, top.clone(), 8), 32);
        assert_eq!(normalize_expr(&e, &NormRules::default()), top);
    }

    #[test]
    fn disabled_rules_leave_expressions_alone() {
        let e = SymExpr::binary(
            BinKind::Add,
            SymExpr::constant(1, 8),
            SymExpr::constant(2, 8),
        );
        assert_eq!(normalize_expr(&e, &NormRules::none()), e);
        assert_eq!(
            normalize_expr(&e, &NormRules::default()).as_const(),
            Some(3)
        );
    }

    #[test]
    fn check_constraints_leave_guards() {
        let c = SymExpr::binary(BinKind::Eq, sym8("x"), SymExpr::constant(1, 8));
        let cs = vec![
            Constraint::branch(c.clone()),
            Constraint::check(crate::symexec::CheckKind::Bounds, c.clone()),
        ];
        assert_eq!(normalize_constraints(&cs, &NormRules::default()).len(), 1);
        let keep = NormRules {
            drop_checks: false,
            ..NormRules::default()
        };
        assert_eq!(normalize_constraints(&cs, &keep).len(), 2);
    }
}
