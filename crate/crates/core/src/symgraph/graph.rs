// SPDX-License-Identifier: Apache-2.0

//! Labeled DAG view of symbolic expressions, and its DOT rendering.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::symexec::{BinKind, ExprKind, SymExpr, UnOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    /// Operand position in the parent.
    pub index: u32,
}

/// Structurally hashed expression DAG. Node ids follow a post-order walk
/// from the roots (operands left to right), so equal expressions always
/// produce equal graphs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SymGraph {
    pub labels: Vec<String>,
    pub edges: Vec<Edge>,
    pub roots: Vec<usize>,
}

/// Node label: lowercase opcode, width, and payload for leaves.
pub fn node_label(e: &SymExpr) -> String {
    let w = e.width();
    match e.kind() {
        ExprKind::Const(v) => format!("const w{w} {v}"),
        ExprKind::Sym(s) => format!("sym w{w} {s}"),
        ExprKind::ExtCall { callee, seq } => format!("ext w{w} {callee}#{seq}"),
        ExprKind::Unary(op, _) => format!("{} w{w}", op.name().to_ascii_lowercase()),
        ExprKind::Binary(op, _, _) => format!("{} w{w}", op.name().to_ascii_lowercase()),
        ExprKind::Read { region, offset } => match offset.as_const() {
            Some(o) => format!("read w{w} {region}[{o}]"),
            None => format!("read w{w} {region}"),
        },
        ExprKind::Ite(..) => format!("ite w{w}"),
    }
}

/// Operands that become edges; constant read offsets live in the label.
fn graph_children(e: &SymExpr) -> Vec<&SymExpr> {
    match e.kind() {
        ExprKind::Read { offset, .. } if offset.as_const().is_some() => Vec::new(),
        _ => e.children(),
    }
}

impl SymGraph {
    pub fn from_expr(e: &SymExpr) -> SymGraph {
        SymGraph::from_exprs(std::slice::from_ref(e))
    }

    pub fn from_exprs(roots: &[SymExpr]) -> SymGraph {
        let mut g = SymGraph::default();
        let mut ids: HashMap<&SymExpr, usize> = HashMap::new();
        for r in roots {
            // explicit post-order so deep expressions do not recurse
            let mut stack: Vec<(&SymExpr, bool)> = vec![(r, false)];
            while let Some((e, expanded)) = stack.pop() {
                if ids.contains_key(e) {
                    continue;
                }
                if !expanded {
                    stack.push((e, true));
                    for c in graph_children(e).into_iter().rev() {
                        stack.push((c, false));
                    }
                    continue;
                }
                let id = g.labels.len();
                g.labels.push(node_label(e));
                for (i, c) in graph_children(e).into_iter().enumerate() {
                    g.edges.push(Edge {
                        parent: id,
                        child: ids[c],
                        index: i as u32,
                    });
                }
                ids.insert(e, id);
            }
            g.roots.push(ids[r]);
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Rebuilds the root expressions from labels and edges.
    pub fn to_exprs(&self) -> Result<Vec<SymExpr>, String> {
        let mut kids: Vec<Vec<(u32, usize)>> = vec![Vec::new(); self.labels.len()];
        for e in &self.edges {
            kids[e.parent].push((e.index, e.child));
        }
        for k in &mut kids {
            k.sort();
        }
        let mut built: Vec<Option<SymExpr>> = vec![None; self.labels.len()];
        let mut order = Vec::new();
        let mut state = vec![0u8; self.labels.len()];
        for &r in &self.roots {
            let mut stack = vec![(r, false)];
            while let Some((n, expanded)) = stack.pop() {
                if expanded {
                    state[n] = 2;
                    order.push(n);
                    continue;
                }
                match state[n] {
                    2 => continue,
                    1 => return Err("graph has a cycle".into()),
                    _ => {}
                }
                state[n] = 1;
                stack.push((n, true));
                for &(_, c) in kids[n].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        for n in order {
            let args: Vec<SymExpr> = kids[n]
                .iter()
                .map(|&(_, c)| built[c].clone().expect("post-order"))
                .collect();
            built[n] = Some(expr_from_label(&self.labels[n], args)?);
        }
        Ok(self
            .roots
            .iter()
            .map(|&r| built[r].clone().expect("root built"))
            .collect())
    }

    /// Deterministic DOT text; nodes are `n<id>`, edges carry operand indices.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph \"{}\" {{\n", name.replace('"', "\\\""));
        out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
        for (i, l) in self.labels.iter().enumerate() {
            let shape = if self.roots.contains(&i) {
                ", peripheries=2"
            } else {
                ""
            };
            let _ = writeln!(out, "  n{i} [label=\"{}\"{shape}];", l.replace('"', "\\\""));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\"];",
                e.parent, e.child, e.index
            );
        }
        out.push_str("}\n");
        out
    }
}

fn expr_from_label(label: &str, args: Vec<SymExpr>) -> Result<SymExpr, String> {
    let mut parts = label.splitn(3, ' ');
    let op = parts.next().unwrap_or_default();
    let w: u32 = parts
        .next()
        .and_then(|w| w.strip_prefix('w'))
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| format!("bad label '{label}'"))?;
    let payload = parts.next();
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("'{label}' expects {n} operands"))
        }
    };
    let mut it = args.clone().into_iter();
    match op {
        "const" => {
            arity(0)?;
            let v = payload
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| format!("bad constant '{label}'"))?;
            Ok(SymExpr::constant(v, w))
        }
        "sym" => {
            arity(0)?;
            Ok(SymExpr::sym(payload.ok_or("missing symbol name")?, w))
        }
        "ext" => {
            arity(0)?;
            let (callee, seq) = payload
                .and_then(|p| p.rsplit_once('#'))
                .ok_or("bad call label")?;
            Ok(SymExpr::ext_call(
                callee,
                seq.parse().map_err(|_| "bad call sequence")?,
                w,
            ))
        }
        "read" => {
            let p = payload.ok_or("missing region")?;
            match p.strip_suffix(']').and_then(|p| p.rsplit_once('[')) {
                Some((region, off)) => {
                    arity(0)?;
                    let off = off.parse().map_err(|_| "bad read offset")?;
                    SymExpr::try_read(region, SymExpr::constant(off, 64), w)
                }
                None => {
                    arity(1)?;
                    SymExpr::try_read(p, it.next().expect("arity"), w)
                }
            }
        }
        "ite" => {
            arity(3)?;
            let (c, a, b) = (
                it.next().expect("arity"),
                it.next().expect("arity"),
                it.next().expect("arity"),
            );
            SymExpr::try_ite(c, a, b)
        }
        _ => {
            if let Some(u) = UnOp::ALL
                .into_iter()
                .find(|u| u.name().eq_ignore_ascii_case(op))
            {
                arity(1)?;
                return SymExpr::try_unary(u, it.next().expect("arity"), w);
            }
            if let Some(b) = BinKind::ALL
                .into_iter()
                .find(|b| b.name().eq_ignore_ascii_case(op))
            {
                arity(2)?;
                let a = it.next().expect("arity");
                return SymExpr::try_binary(b, a, it.next().expect("arity"));
            }
            Err(format!("unknown opcode in label '{label}'"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_constant_is_one_node() {
        let g = SymGraph::from_expr(&SymExpr::constant(7, 8));
        assert_eq!(g.labels, vec!["const w8 7"]);
        assert!(g.edges.is_empty());
        assert_eq!(
            g.to_dot("k"),
            "digraph \"k\" {\n  node [shape=box, fontname=\"monospace\"];\n  n0 [label=\"const w8 7\", peripheries=2];\n}\n"
        );
    }

    #[test]
    fn add_has_two_ordered_edges() {
        let e = SymExpr::binary(
            BinKind::Add,
            SymExpr::sym("arg0", 32),
            SymExpr::constant(3, 32),
        );
        let g = SymGraph::from_expr(&e);
        assert_eq!(g.labels, vec!["sym w32 arg0", "const w32 3", "add w32"]);
        assert_eq!(
            g.edges,
            vec![
                Edge {
                    parent: 2,
                    child: 0,
                    index: 0
                },
                Edge {
                    parent: 2,
                    child: 1,
                    index: 1
                }
            ]
        );
        assert!(g.to_dot("f").contains("  n2 -> n1 [label=\"1\"];\n"));
    }

    #[test]
    fn shared_subexpressions_are_one_node() {
        let x = SymExpr::binary(BinKind::Mul, SymExpr::sym("a", 8), SymExpr::sym("b", 8));
        let e = SymExpr::binary(BinKind::Sub, x.clone(), x);
        let g = SymGraph::from_expr(&e);
        assert_eq!(g.node_count(), 4);
        let into_mul = g.edges.iter().filter(|ed| ed.child == 2).count();
        assert_eq!(into_mul, 2);
    }

    #[test]
    fn labels_round_trip_to_expressions() {
        let a = SymExpr::sym("arg0", 8);
        let r = SymExpr::read("arg1", SymExpr::unary(UnOp::ZExt, a.clone(), 64), 16);
        let e = SymExpr::ite(
            SymExpr::binary(BinKind::Ult, a.clone(), SymExpr::constant(4, 8)),
            SymExpr::unary(UnOp::ZExt, a, 16),
            SymExpr::binary(
                BinKind::Add,
                r,
                SymExpr::read("arg1", SymExpr::constant(2, 64), 16),
            ),
        );
        let f = SymExpr::ext_call("g", 1, 16);
        let g = SymGraph::from_exprs(&[e.clone(), f.clone()]);
        assert_eq!(g.to_exprs().unwrap(), vec![e, f]);
    }
}
