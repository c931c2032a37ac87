// SPDX-License-Identifier: Apache-2.0

//! Minimal prompt context for one function, and struct field usage.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ingest::{scan_refs, SourceUnit, TypeRef};
use super::lex::blank_c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FragmentKind {
    Macro,
    Typedef,
    Record,
    Declaration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFragment {
    pub kind: FragmentKind,
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Def {
    Macro(String),
    Type(TypeRef),
}

impl Def {
    fn text<'u>(&self, u: &'u SourceUnit) -> &'u str {
        match self {
            Def::Macro(m) => &u.macros[m],
            Def::Type(TypeRef::Record(r)) => &u.records[r],
            Def::Type(TypeRef::Typedef(t)) => &u.typedefs[t],
        }
    }

    fn fragment(&self, u: &SourceUnit) -> ContextFragment {
        let (kind, name) = match self {
            Def::Macro(m) => (FragmentKind::Macro, m),
            Def::Type(TypeRef::Record(r)) => (FragmentKind::Record, r),
            Def::Type(TypeRef::Typedef(t)) => (FragmentKind::Typedef, t),
        };
        ContextFragment {
            kind,
            name: name.clone(),
            text: self.text(u).to_string(),
        }
    }
}

fn defs_of(u: &SourceUnit, types: &BTreeSet<String>, macros: &BTreeSet<String>) -> BTreeSet<Def> {
    let mut out: BTreeSet<Def> = macros.iter().map(|m| Def::Macro(m.clone())).collect();
    out.extend(
        types
            .iter()
            .filter_map(|t| u.resolve_type(t))
            .map(Def::Type),
    );
    out
}

fn deps(u: &SourceUnit, d: &Def) -> BTreeSet<Def> {
    let text = blank_c(d.text(u));
    let r = scan_refs(u, &text, None, false);
    let mut out = defs_of(u, &r.types, &r.macros);
    out.remove(d);
    out
}

/// Closure of the definitions `root` needs, dependencies first.
fn closure(u: &SourceUnit, roots: BTreeSet<Def>) -> Vec<Def> {
    let mut done: BTreeSet<Def> = BTreeSet::new();
    let mut order = Vec::new();
    for r in roots {
        // iterative post-order; `on_stack` breaks cycles through pointers
        let mut stack = vec![(r, false)];
        let mut on_stack: BTreeSet<Def> = BTreeSet::new();
        while let Some((d, expanded)) = stack.pop() {
            if done.contains(&d) {
                continue;
            }
            if expanded {
                on_stack.remove(&d);
                done.insert(d.clone());
                order.push(d);
                continue;
            }
            if !on_stack.insert(d.clone()) {
                continue;
            }
            stack.push((d.clone(), true));
            for c in deps(u, &d).into_iter().rev() {
                if !done.contains(&c) && !on_stack.contains(&c) {
                    stack.push((c, false));
                }
            }
        }
    }
    order
}

/// Definitions `name` needs, dependencies before dependents, followed by
/// one-line declarations of the callees the unit declares or defines.
/// Returns an empty list for an unknown function.
pub fn build_context(u: &SourceUnit, name: &str) -> Vec<ContextFragment> {
    let Some(f) = u.function(name) else {
        return Vec::new();
    };
    let mut out: Vec<ContextFragment> = closure(u, defs_of(u, &f.types, &f.macros))
        .iter()
        .map(|d| d.fragment(u))
        .collect();
    for c in &f.callees {
        let decl = u
            .declarations
            .get(c)
            .map(|d| d.split_whitespace().collect::<Vec<_>>().join(" "))
            .or_else(|| u.function(c).map(|g| format!("{};", g.signature)));
        if let Some(text) = decl {
            out.push(ContextFragment {
                kind: FragmentKind::Declaration,
                name: c.clone(),
                text,
            });
        }
    }
    out
}

/// A statement that touches a field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldUse {
    pub function: String,
    pub snippet: String,
}

fn is_byte_sequence(decl: &str) -> bool {
    let words: Vec<&str> = decl
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    let byte_ty = words
        .iter()
        .any(|w| matches!(*w, "char" | "uint8_t" | "int8_t"));
    byte_ty && (decl.contains('*') || decl.contains('['))
}

/// Byte-sequence fields (`char *`, `char[N]`, `uint8_t *`) of a record.
pub fn byte_sequence_fields(u: &SourceUnit, record: &str) -> Vec<String> {
    let Some(text) = u.records.get(record) else {
        return Vec::new();
    };
    let blank = blank_c(text);
    let (Some(open), Some(close)) = (blank.find('{'), blank.rfind('}')) else {
        return Vec::new();
    };
    blank[open + 1..close]
        .split(';')
        .filter(|d| is_byte_sequence(d))
        .filter_map(|d| {
            let head = d.split('[').next().unwrap_or(d);
            super::lex::identifiers(head)
                .last()
                .map(|(_, s)| s.to_string())
        })
        .collect()
}

/// Statements of a function body: split at `;`, `{` and `}` outside
/// parentheses, with byte ranges into the text.
fn statements(blank: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in blank.bytes().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b';' | b'{' | b'}' if depth == 0 => {
                out.push((start, i + 1));
                start = i + 1;
            }
            _ => {}
        }
    }
    out
}

/// For each byte-sequence field of `record`, every statement in the unit
/// that mentions `.field` or `->field`, verbatim.
pub fn analyze_field_usage(u: &SourceUnit, record: &str) -> BTreeMap<String, Vec<FieldUse>> {
    let mut out = BTreeMap::new();
    for field in byte_sequence_fields(u, record) {
        let re = Regex::new(&format!(r"(?:\.|->)\s*{}\b", regex::escape(&field)))
            .expect("escaped field name");
        let mut uses = Vec::new();
        for f in &u.functions {
            let blank = blank_c(&f.source);
            for (s, e) in statements(&blank) {
                if re.is_match(&blank[s..e]) {
                    let snippet = f.source[s..e].trim().trim_start_matches('{').trim();
                    uses.push(FieldUse {
                        function: f.name.clone(),
                        snippet: snippet.to_string(),
                    });
                }
            }
        }
        out.insert(field, uses);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ingest_c;

    #[test]
    fn nested_struct_comes_first() {
        let u = ingest_c("struct B { int x; };\nstruct A { struct B b; };\nint f(struct A *a) { return a->b.x; }\n");
        let ctx = build_context(&u, "f");
        let names: Vec<&str> = ctx.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["B", "A"]);
    }

    #[test]
    fn no_references_gives_callee_declarations_only() {
        let u = ingest_c("int g(int);\nint h(int a) { return a; }\nint f(int a) { return g(a) + h(a) + ext(a); }\n");
        let ctx = build_context(&u, "f");
        assert!(ctx.iter().all(|c| c.kind == FragmentKind::Declaration));
        assert_eq!(
            ctx.iter().map(|c| c.text.as_str()).collect::<Vec<_>>(),
            vec!["int g(int);", "int h(int a);"]
        );
    }

    #[test]
    fn only_used_macros_are_included() {
        let mut src: String = (0..10).map(|i| format!("#define M{i} {i}\n")).collect();
        src.push_str("int f(void) { return M3 + M7; }\n");
        let u = ingest_c(&src);
        let ctx = build_context(&u, "f");
        assert_eq!(
            ctx.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["M3", "M7"]
        );
    }

    #[test]
    fn macro_in_array_size_precedes_struct() {
        let u = ingest_c(
            "#define N 8\nstruct S { char buf[N]; };\nint f(struct S *s) { return s->buf[0]; }\n",
        );
        let ctx = build_context(&u, "f");
        assert_eq!(
            ctx.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["N", "S"]
        );
    }

    const CSV: &str = r#"
struct csv { char *buf; size_t len; char tag[4]; int unused; char *quiet; };
void grow(struct csv *p, size_t n) { p->buf = realloc(p->buf, n); p->len = n; }
void put(struct csv *p, char c) { p->buf[p->len] = c; }
int first(struct csv q) { if (q.len) { return q.buf[0]; } return 0; }
"#;

    #[test]
    fn field_usage_per_function() {
        let u = ingest_c(CSV);
        assert_eq!(byte_sequence_fields(&u, "csv"), vec!["buf", "tag", "quiet"]);
        let uses = analyze_field_usage(&u, "csv");
        assert!(uses["quiet"].is_empty());
        let buf = &uses["buf"];
        assert_eq!(buf.len(), 3);
        assert_eq!(
            buf.iter().map(|x| x.function.as_str()).collect::<Vec<_>>(),
            vec!["grow", "put", "first"]
        );
        assert_eq!(buf[0].snippet, "p->buf = realloc(p->buf, n);");
    }
}
