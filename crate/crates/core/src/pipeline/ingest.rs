// SPDX-License-Identifier: Apache-2.0

//! Extraction of functions and definitions from a C subset.
//!
//! The extractor balances brackets over a copy of the source with comments
//! and literals blanked; it is not a parser. Top-level items it cannot
//! delimit are skipped with a warning and the rest of the file is still
//! ingested.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::lex::{blank_c, identifiers, is_ident, line_of};

const KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "const",
    "continue",
    "default",
    "do",
    "else",
    "enum",
    "extern",
    "for",
    "goto",
    "if",
    "inline",
    "register",
    "restrict",
    "return",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "volatile",
    "while",
    "_Alignof",
    "_Static_assert",
];

const BUILTIN_TYPES: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "_Bool",
    "bool",
    "size_t",
    "ssize_t",
    "ptrdiff_t",
    "intptr_t",
    "uintptr_t",
    "int8_t",
    "int16_t",
    "int32_t",
    "int64_t",
    "uint8_t",
    "uint16_t",
    "uint32_t",
    "uint64_t",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_builtin_type(s: &str) -> bool {
    BUILTIN_TYPES.contains(&s)
}

/// One function definition with the names it references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CFunction {
    pub name: String,
    /// Verbatim definition text.
    pub source: String,
    /// Header up to the opening brace, whitespace-collapsed.
    pub signature: String,
    /// 1-based line of the definition in the ingested file.
    pub line: usize,
    /// Record and typedef names defined in the unit.
    pub types: BTreeSet<String>,
    pub macros: BTreeSet<String>,
    pub callees: BTreeSet<String>,
    /// Type or macro names that resolve nowhere in the unit.
    pub external: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceUnit {
    pub functions: Vec<CFunction>,
    /// struct/union definitions by tag (or by alias for anonymous ones).
    pub records: BTreeMap<String, String>,
    /// Non-record typedefs and enums by name.
    pub typedefs: BTreeMap<String, String>,
    /// Typedef aliases of records, alias -> record name.
    pub record_aliases: BTreeMap<String, String>,
    pub macros: BTreeMap<String, String>,
    /// Prototypes by function name.
    pub declarations: BTreeMap<String, String>,
    /// Enumerator constants, which resolve like macros.
    pub enumerators: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl SourceUnit {
    pub fn function(&self, name: &str) -> Option<&CFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Resolves a referenced type name to the definition it stands for.
    pub(crate) fn resolve_type(&self, name: &str) -> Option<TypeRef> {
        if self.records.contains_key(name) {
            Some(TypeRef::Record(name.to_string()))
        } else if let Some(r) = self.record_aliases.get(name) {
            Some(TypeRef::Record(r.clone()))
        } else if self.typedefs.contains_key(name) {
            Some(TypeRef::Typedef(name.to_string()))
        } else {
            None
        }
    }

    fn is_type_name(&self, name: &str) -> bool {
        self.resolve_type(name).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum TypeRef {
    Record(String),
    Typedef(String),
}

/// Names one piece of text refers to.
#[derive(Debug, Default)]
pub(crate) struct Refs {
    pub types: BTreeSet<String>,
    pub macros: BTreeSet<String>,
    pub callees: BTreeSet<String>,
    pub external: BTreeSet<String>,
}

static DECL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[;{}(,])\s*(?:(?:const|volatile|static|register|unsigned|signed)\s+)*([A-Za-z_]\w*)\s*(\**)\s*([A-Za-z_]\w*)\s*[=;,)\[]")
        .expect("valid regex")
});
static CAST_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\(\s*(?:const\s+)?([A-Za-z_]\w*)\s*\*+\s*\)").expect("valid regex")
});
static CAPS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Z][A-Z0-9_]+$").expect("valid regex"));

/// (type word, declared name) pairs; separators are shared between
/// neighbouring matches, as in `(int a, int b)`.
fn declarations(text: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut at = 0;
    while let Some(c) = DECL_RE.captures_at(text, at) {
        let (ty, name) = (c.get(1).expect("group"), c.get(3).expect("group"));
        // `return x;` and `goto out;` have the same shape
        if !is_keyword(ty.as_str()) {
            out.push((ty.as_str(), name.as_str()));
        }
        at = name.end();
    }
    out
}

fn prev_word(text: &str, at: usize) -> Option<&str> {
    let head = text[..at].trim_end();
    let start = head
        .bytes()
        .rposition(|c| !is_ident(c))
        .map_or(0, |p| p + 1);
    (start < head.len()).then(|| &head[start..])
}

fn preceded_by_member_access(text: &str, at: usize) -> bool {
    let head = text[..at].trim_end();
    head.ends_with('.') || head.ends_with("->")
}

fn followed_by_paren(text: &str, end: usize) -> bool {
    text[end..].trim_start().starts_with('(')
}

/// Scans blanked text for referenced names. `self_name` is excluded from
/// callees; `locals` are identifiers the text itself declares.
pub(crate) fn scan_refs(
    u: &SourceUnit,
    text: &str,
    self_name: Option<&str>,
    with_heuristics: bool,
) -> Refs {
    let mut r = Refs::default();
    let decls = if with_heuristics {
        declarations(text)
    } else {
        Vec::new()
    };
    let locals: BTreeSet<&str> = decls.iter().map(|d| d.1).collect();
    for (at, id) in identifiers(text) {
        if preceded_by_member_access(text, at) || is_keyword(id) || is_builtin_type(id) {
            continue;
        }
        let end = at + id.len();
        if matches!(prev_word(text, at), Some("struct" | "union" | "enum")) {
            match u.resolve_type(id) {
                Some(_) => {
                    r.types.insert(id.to_string());
                }
                None => {
                    r.external.insert(id.to_string());
                }
            }
            continue;
        }
        if u.is_type_name(id) {
            r.types.insert(id.to_string());
        } else if u.macros.contains_key(id) {
            r.macros.insert(id.to_string());
        } else if followed_by_paren(text, end) {
            if Some(id) != self_name {
                r.callees.insert(id.to_string());
            }
        } else if with_heuristics
            && CAPS_RE.is_match(id)
            && !u.enumerators.contains(id)
            && !locals.contains(id)
        {
            r.external.insert(id.to_string());
        }
    }
    if with_heuristics {
        let mut candidates: Vec<&str> = decls.iter().map(|d| d.0).collect();
        candidates.extend(
            CAST_RE
                .captures_iter(text)
                .map(|c| c.get(1).expect("group").as_str()),
        );
        for t in candidates {
            if !is_keyword(t)
                && !is_builtin_type(t)
                && !u.is_type_name(t)
                && !u.macros.contains_key(t)
                && !locals.contains(t)
            {
                r.external.insert(t.to_string());
            }
        }
    }
    r
}

/// Byte index just past the bracket matching the one at `open`.
fn matching(b: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, &c) in b.iter().enumerate().skip(open) {
        match c {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

enum Item {
    Directive(usize, usize),
    Decl(usize, usize),
    Function(usize, usize),
}

/// Next top-level item starting at or after `pos`, or the position to resume
/// at after an undelimitable region.
fn next_item(b: &[u8], pos: usize) -> Result<Option<Item>, usize> {
    let mut i = pos;
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    if i >= b.len() {
        return Ok(None);
    }
    let start = i;
    let next_line = |from: usize| {
        b[from..]
            .iter()
            .position(|&c| c == b'\n')
            .map_or(b.len(), |p| from + p + 1)
    };
    if b[i] == b'#' {
        let mut end = i;
        loop {
            let nl = b[end..]
                .iter()
                .position(|&c| c == b'\n')
                .map_or(b.len(), |p| end + p);
            let continued =
                b[..nl].iter().rev().find(|c| **c != b'\r' && **c != b' ') == Some(&b'\\');
            if continued && nl < b.len() {
                end = nl + 1;
            } else {
                return Ok(Some(Item::Directive(start, nl)));
            }
        }
    }
    let mut saw_paren = false;
    while i < b.len() {
        match b[i] {
            b';' => return Ok(Some(Item::Decl(start, i + 1))),
            b'(' | b'[' => {
                saw_paren |= b[i] == b'(';
                i = matching(b, i).ok_or_else(|| next_line(start))?;
            }
            b'{' => {
                let close = matching(b, i).ok_or_else(|| next_line(start))?;
                let head = String::from_utf8_lossy(&b[start..i]);
                let record = head
                    .split_whitespace()
                    .any(|w| matches!(w, "typedef" | "struct" | "union" | "enum"))
                    && !saw_paren;
                if saw_paren && !record {
                    return Ok(Some(Item::Function(start, close)));
                }
                i = close;
            }
            b')' | b']' | b'}' => return Err(next_line(start)),
            _ => i += 1,
        }
    }
    Err(b.len())
}

fn last_ident(text: &str) -> Option<&str> {
    identifiers(text).last().map(|(_, s)| *s)
}

/// Name declared by a declaration: the identifier before the first top-level
/// `(` or, failing that, before `[`, `=` or `;`.
fn declared_name(blank: &str) -> Option<&str> {
    let b = blank.as_bytes();
    let stop = b
        .iter()
        .position(|&c| matches!(c, b'(' | b'[' | b'=' | b';'))
        .unwrap_or(b.len());
    last_ident(&blank[..stop])
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

static FNPTR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(\s*\*\s*([A-Za-z_]\w*)\s*\)").expect("valid regex"));
static TAGGED_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:typedef\s+)?(struct|union|enum)\s*([A-Za-z_]\w*)?\s*\{")
        .expect("valid regex")
});

fn enumerators(body: &str) -> impl Iterator<Item = String> + '_ {
    body.split(',')
        .filter_map(|e| identifiers(e).first().map(|(_, s)| s.to_string()))
}

/// Extracts functions and definitions from C source.
pub fn ingest_c(source: &str) -> SourceUnit {
    let blank = blank_c(source);
    let b = blank.as_bytes();
    let mut u = SourceUnit::default();
    let mut fns: Vec<(usize, usize)> = Vec::new();
    let mut pos = 0;
    loop {
        match next_item(b, pos) {
            Ok(None) => break,
            Err(resume) => {
                let at = pos + blank[pos..].len() - blank[pos..].trim_start().len();
                let line = line_of(source, at);
                let msg = format!("line {line}: unbalanced brackets; skipped");
                log::warn!("{msg}");
                u.warnings.push(msg);
                pos = resume.max(pos + 1);
            }
            Ok(Some(item)) => match item {
                Item::Directive(s, e) => {
                    ingest_directive(&mut u, &source[s..e], &blank[s..e], line_of(source, s));
                    pos = e;
                }
                Item::Function(s, e) => {
                    fns.push((s, e));
                    pos = e;
                }
                Item::Decl(s, e) => {
                    ingest_decl(&mut u, &source[s..e], &blank[s..e]);
                    pos = e;
                }
            },
        }
    }
    // references resolve against every definition, including later ones
    for (s, e) in fns {
        let text = &blank[s..e];
        let brace = text.find('{').expect("function item has a body");
        let Some(name) = declared_name(&text[..brace]) else {
            u.warnings.push(format!(
                "line {}: function without a name; skipped",
                line_of(source, s)
            ));
            continue;
        };
        let refs = scan_refs(&u, text, Some(name), true);
        u.functions.push(CFunction {
            name: name.to_string(),
            source: source[s..e].to_string(),
            signature: collapse(&text[..brace]),
            line: line_of(source, s),
            types: refs.types,
            macros: refs.macros,
            callees: refs.callees,
            external: refs.external,
        });
    }
    u
}

fn ingest_directive(u: &mut SourceUnit, text: &str, blank: &str, line: usize) {
    let body = blank.trim_start_matches('#').trim_start();
    let Some(rest) = body.strip_prefix("define") else {
        return;
    };
    let rest_trim = rest.trim_start();
    let Some((_, name)) = identifiers(rest_trim).first().copied() else {
        return;
    };
    let function_like = rest_trim[name.len()..].starts_with('(');
    if function_like && rest_trim.contains("##") {
        let msg = format!("line {line}: macro {name} uses token pasting; skipped");
        log::warn!("{msg}");
        u.warnings.push(msg);
        return;
    }
    u.macros
        .insert(name.to_string(), text.trim_end().to_string());
}

fn ingest_decl(u: &mut SourceUnit, text: &str, blank: &str) {
    let text = text.trim().to_string();
    if let Some(c) = TAGGED_RE.captures(blank) {
        let kind = &c[1];
        let tag = c.get(2).map(|m| m.as_str().to_string());
        let open = blank.find('{').expect("matched a brace");
        let close = matching(blank.as_bytes(), open).unwrap_or(blank.len());
        let trailer = &blank[close..];
        let typedef = blank.trim_start().starts_with("typedef");
        let alias = if typedef {
            identifiers(trailer).first().map(|(_, s)| s.to_string())
        } else {
            None
        };
        if kind == "enum" {
            u.enumerators
                .extend(enumerators(&blank[open + 1..close.saturating_sub(1)]));
            if let Some(n) = alias.or(tag) {
                u.typedefs.insert(n, text);
            }
            return;
        }
        let Some(name) = tag.clone().or_else(|| alias.clone()) else {
            return;
        };
        if let Some(a) = alias.filter(|a| *a != name) {
            u.record_aliases.insert(a, name.clone());
        }
        u.records.insert(name, text);
        return;
    }
    let trimmed = blank.trim_start();
    if let Some(rest) = trimmed.strip_prefix("typedef") {
        let alias = FNPTR_RE
            .captures(rest)
            .map(|c| c[1].to_string())
            .or_else(|| {
                let stop = rest.find('[').unwrap_or(rest.len());
                last_ident(&rest[..stop]).map(str::to_string)
            });
        if let Some(a) = alias {
            // `typedef struct tag alias;` aliases a record
            let words: Vec<&str> = identifiers(rest).into_iter().map(|(_, s)| s).collect();
            if words.len() == 3 && matches!(words[0], "struct" | "union") {
                u.record_aliases.insert(a, words[1].to_string());
            } else {
                u.typedefs.insert(a, text);
            }
        }
        return;
    }
    if trimmed.contains('(') && !FNPTR_RE.is_match(trimmed) {
        if let Some(name) = declared_name(trimmed) {
            u.declarations.insert(name.to_string(), text);
        }
    }
}
