// SPDX-License-Identifier: Apache-2.0

//! Canonical printer. `parse_ir(print_ir(m)) == m` for every valid module.

use std::fmt::Write;

use super::types::*;

fn print_op(op: &Op) -> String {
    match op {
        Op::Const { ty, value } => format!("const {ty} {value}"),
        Op::Bin { op, lhs, rhs } => format!("{} {lhs}, {rhs}", op.mnemonic()),
        Op::Icmp { pred, lhs, rhs } => format!("icmp {} {lhs}, {rhs}", pred.mnemonic()),
        Op::Cast { kind, to, value } => format!("{} i{to} {value}", kind.mnemonic()),
        Op::Alloc { ty } => format!("alloc {ty}"),
        Op::Load { ty, ptr } => format!("load {ty} {ptr}"),
        Op::Store { value, ptr } => format!("store {value}, {ptr}"),
        Op::FieldAddr { base, field } => format!("field-addr {base}, {field}"),
        Op::IndexAddr { base, index } => format!("index-addr {base}, {index}"),
        Op::Call { ret, callee, args } => {
            let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            format!("call {ret} {callee}({})", args.join(", "))
        }
        Op::Checked {
            op,
            signed,
            lhs,
            rhs,
        } => format!("{} {lhs}, {rhs}", op.mnemonic(*signed)),
        Op::BoundsCheckedIndex { base, index } => format!("bounds-checked-index {base}, {index}"),
        Op::OptionUnwrap { value } => format!("option-unwrap {value}"),
    }
}

fn print_term(t: &Terminator) -> String {
    match t {
        Terminator::Ret(None) => "ret".into(),
        Terminator::Ret(Some(v)) => format!("ret {v}"),
        Terminator::Jmp(l) => format!("jmp {l}"),
        Terminator::Br {
            cond,
            then_label,
            else_label,
        } => format!("br {cond}, {then_label}, {else_label}"),
        Terminator::Panic(code) => format!("panic {code}"),
    }
}

pub fn print_function(f: &IrFunction) -> String {
    let mut s = String::new();
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| format!("{}{}: {}", if p.out { "out " } else { "" }, p.name, p.ty))
        .collect();
    let _ = writeln!(
        s,
        "fn {} {}({}) -> {} {{",
        f.dialect,
        f.name,
        params.join(", "),
        f.ret
    );
    for b in &f.blocks {
        let _ = writeln!(s, "{}:", b.label);
        for i in &b.instrs {
            match &i.result {
                Some((name, _)) => {
                    let _ = writeln!(s, "  {name} = {}", print_op(&i.op));
                }
                None => {
                    let _ = writeln!(s, "  {}", print_op(&i.op));
                }
            }
        }
        let _ = writeln!(s, "  {}", print_term(&b.term));
    }
    s.push_str("}\n");
    s
}

/// Records first (sorted by name), then functions in order, separated by
/// blank lines.
pub fn print_ir(m: &Module) -> String {
    let mut parts: Vec<String> = m
        .records
        .values()
        .map(|r| {
            let fields: Vec<String> = r.fields.iter().map(|(n, t)| format!("{n}: {t}")).collect();
            format!("type {} = {{ {} }}\n", r.name, fields.join(", "))
        })
        .collect();
    parts.extend(m.functions.iter().map(print_function));
    parts.join("\n")
}

#[cfg(test)]
mod tests {
    use super::super::parse_ir;
    use super::*;

    #[test]
    fn empty_module_prints_nothing() {
        assert_eq!(print_ir(&Module::default()), "");
    }

    #[test]
    fn add2_canonical_text() {
        let m = parse_ir("fn c add2(a:i32,b:i32)->i32 { e: r=add a,b; ret r }").unwrap();
        assert_eq!(
            print_ir(&m),
            "fn c add2(a: i32, b: i32) -> i32 {\ne:\n  r = add a, b\n  ret r\n}\n"
        );
    }

    #[test]
    fn two_block_round_trip() {
        let src = "type P = { x: i8, next: *P }\n\
                   fn rust abs(a: i32, out p: *P) -> i32 {\nentry:\n  c = icmp slt a, 0\n  br c, neg, pos\n\
                   neg:\n  n = sub 0, a\n  ret n\npos:\n  f = field-addr p, x\n  store 7, f\n  ret a\n}\n";
        let m = parse_ir(src).unwrap();
        assert_eq!(m.functions[0].blocks.len(), 3);
        let text = print_ir(&m);
        let again = parse_ir(&text).unwrap();
        assert_eq!(again, m);
        assert_eq!(print_ir(&again), text);
    }
}
