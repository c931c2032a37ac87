// SPDX-License-Identifier: Apache-2.0

//! Source-level infix rendering of symbolic expressions for diagnostics.

use std::collections::BTreeMap;

use crate::symexec::{BinKind, ExprKind, SymExpr, UnOp};

/// Names used to print leaves in terms of the function's parameters.
#[derive(Debug, Clone, Default)]
pub struct Names<'a> {
    pub params: &'a [String],
    pub leaves: Option<&'a BTreeMap<(String, u64), String>>,
}

impl Names<'_> {
    /// Replaces a leading `arg<i>` by the parameter's source name.
    fn rename(&self, s: &str) -> String {
        let Some(rest) = s.strip_prefix("arg") else {
            return s.to_string();
        };
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return s.to_string();
        }
        match rest[..digits]
            .parse::<usize>()
            .ok()
            .and_then(|i| self.params.get(i))
        {
            Some(name) if !name.is_empty() => format!("{name}{}", &rest[digits..]),
            _ => s.to_string(),
        }
    }
}

fn op_text(op: BinKind) -> &'static str {
    match op {
        BinKind::Add => "+",
        BinKind::Sub => "-",
        BinKind::Mul => "*",
        BinKind::UDiv => "/",
        BinKind::SDiv => "/s",
        BinKind::And => "&",
        BinKind::Or => "|",
        BinKind::Xor => "^",
        BinKind::Shl => "<<",
        BinKind::LShr => ">>",
        BinKind::AShr => ">>s",
        BinKind::Eq => "==",
        BinKind::Ne => "!=",
        BinKind::Ult => "<",
        BinKind::Slt => "<s",
        BinKind::Ule => "<=",
        BinKind::Sle => "<=s",
    }
}

/// Comparison text after negation: `!(a < b)` is `a >= b`.
fn negated(op: BinKind) -> Option<&'static str> {
    Some(match op {
        BinKind::Eq => "!=",
        BinKind::Ne => "==",
        BinKind::Ult => ">=",
        BinKind::Slt => ">=s",
        BinKind::Ule => ">",
        BinKind::Sle => ">s",
        _ => return None,
    })
}

/// Infix text; the outermost operator is not parenthesized.
pub fn infix(e: &SymExpr, names: &Names<'_>) -> String {
    go(e, names, true)
}

fn go(e: &SymExpr, n: &Names<'_>, top: bool) -> String {
    let wrap = |s: String| if top { s } else { format!("({s})") };
    match e.kind() {
        ExprKind::Const(v) if e.width() == 1 => {
            (if *v == 1 { "true" } else { "false" }).to_string()
        }
        ExprKind::Const(v) => v.to_string(),
        ExprKind::Sym(s) => n.rename(s),
        ExprKind::ExtCall { callee, seq } if *seq == 0 => format!("{callee}()"),
        ExprKind::ExtCall { callee, seq } => format!("{callee}()#{seq}"),
        ExprKind::Read { region, offset } => match offset.as_const() {
            Some(o) => match n.leaves.and_then(|l| l.get(&(region.clone(), o))) {
                Some(path) => n.rename(path),
                None => format!("{}[{o}]", n.rename(region)),
            },
            None => format!("{}[{}]", n.rename(region), go(offset, n, true)),
        },
        ExprKind::Unary(UnOp::Not, a) if e.width() == 1 => match a.kind() {
            ExprKind::Binary(op, x, y) if negated(*op).is_some() => wrap(format!(
                "{} {} {}",
                go(x, n, false),
                negated(*op).expect("comparison"),
                go(y, n, false)
            )),
            _ => format!("!{}", go(a, n, false)),
        },
        ExprKind::Unary(UnOp::Not, a) => format!("~{}", go(a, n, false)),
        ExprKind::Unary(UnOp::Neg, a) => format!("-{}", go(a, n, false)),
        ExprKind::Unary(op, a) => format!(
            "{}{}({})",
            op.name().to_ascii_lowercase(),
            e.width(),
            go(a, n, true)
        ),
        ExprKind::Binary(op, a, b) => wrap(format!(
            "{} {} {}",
            go(a, n, false),
            op_text(*op),
            go(b, n, false)
        )),
        ExprKind::Ite(c, a, b) => wrap(format!(
            "{} ? {} : {}",
            go(c, n, false),
            go(a, n, false),
            go(b, n, false)
        )),
    }
}
