// SPDX-License-Identifier: Apache-2.0

//! Text codec for path summaries in a KQuery-style s-expression syntax.
//!
//! Leaves (constants, symbols, external-call results) carry no width of their
//! own. A leaf is written bare when its width is the one its position
//! implies and as `(w8 x)` otherwise. Implied widths: the operation width
//! for arithmetic operands, the other operand's width for comparison and
//! `Ite` arms (32 when both are leaves), 64 for `Read` offsets, 1 for
//! constraints and `Ite` conditions, 32 for outputs, none for cast operands.
//!
//! Non-leaf nodes referenced more than once in a query are printed once as
//! `N<k>:(...)` and referenced afterwards as `N<k>`. The full grammar is in
//! `docs/kquery.md`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::symexec::{
    mask, BinKind, CheckKind, Constraint, ConstraintKind, ExprKind, OutputBinding, PathSummary,
    SymExpr, Terminal, UnOp,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct KqueryError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

const OUTPUT_WIDTH: u32 = 32;
const PAIR_WIDTH: u32 = 32;

fn leaf_atom(e: &SymExpr) -> String {
    match e.kind() {
        ExprKind::Const(v) => v.to_string(),
        ExprKind::Sym(s) => s.clone(),
        ExprKind::ExtCall { callee, seq } => format!("ext.{callee}#{seq}"),
        _ => unreachable!("not a leaf"),
    }
}

/// Implied width of two sibling operands that must agree.
fn pair_width(a: &SymExpr, b: &SymExpr) -> u32 {
    if a.is_leaf() && b.is_leaf() {
        PAIR_WIDTH
    } else {
        a.width()
    }
}

struct Printer {
    refs: HashMap<usize, u32>,
    labels: HashMap<usize, usize>,
    out: String,
}

impl Printer {
    fn new(roots: &[&SymExpr]) -> Printer {
        let mut refs: HashMap<usize, u32> = HashMap::new();
        let mut stack: Vec<&SymExpr> = roots.to_vec();
        while let Some(e) = stack.pop() {
            let n = refs.entry(e.node_id()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stack.extend(e.children());
            }
        }
        Printer {
            refs,
            labels: HashMap::new(),
            out: String::new(),
        }
    }

    fn expr(&mut self, e: &SymExpr, implied: Option<u32>) {
        if e.is_leaf() {
            if implied == Some(e.width()) {
                self.out.push_str(&leaf_atom(e));
            } else {
                let _ = write!(self.out, "(w{} {})", e.width(), leaf_atom(e));
            }
            return;
        }
        let id = e.node_id();
        if let Some(k) = self.labels.get(&id) {
            let _ = write!(self.out, "N{k}");
            return;
        }
        if self.refs.get(&id).copied().unwrap_or(0) > 1 {
            let k = self.labels.len();
            self.labels.insert(id, k);
            let _ = write!(self.out, "N{k}:");
        }
        let w = e.width();
        match e.kind() {
            ExprKind::Unary(op, a) => {
                let _ = write!(self.out, "({} w{w} ", op.name());
                self.expr(a, if op.is_cast() { None } else { Some(w) });
            }
            ExprKind::Binary(op, a, b) => {
                let implied = if op.is_compare() {
                    let _ = write!(self.out, "({} ", op.name());
                    pair_width(a, b)
                } else {
                    let _ = write!(self.out, "({} w{w} ", op.name());
                    w
                };
                self.expr(a, Some(implied));
                self.out.push(' ');
                self.expr(b, Some(implied));
            }
            ExprKind::Read { region, offset } => {
                let _ = write!(self.out, "(Read w{w} ");
                self.expr(offset, Some(64));
                let _ = write!(self.out, " {region}");
            }
            ExprKind::Ite(c, a, b) => {
                self.out.push_str("(Ite ");
                self.expr(c, Some(1));
                let implied = pair_width(a, b);
                self.out.push(' ');
                self.expr(a, Some(implied));
                self.out.push(' ');
                self.expr(b, Some(implied));
            }
            _ => unreachable!("leaves handled above"),
        }
        self.out.push(')');
    }
}

fn quote(s: &str) -> String {
    let mut q = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

/// Canonical text of one summary.
pub fn to_kquery(s: &PathSummary) -> String {
    let mut roots: Vec<&SymExpr> = s.constraints.iter().map(|c| &c.expr).collect();
    roots.extend(s.ret.iter());
    roots.extend(s.outputs.iter().map(|o| &o.value));
    let mut p = Printer::new(&roots);
    p.out.push_str("(query [");
    for (i, c) in s.constraints.iter().enumerate() {
        if i > 0 {
            p.out.push(' ');
        }
        match c.kind {
            ConstraintKind::Branch => p.expr(&c.expr, Some(1)),
            ConstraintKind::Check(k) => {
                let _ = write!(p.out, "(Check {} ", k.name());
                p.expr(&c.expr, Some(1));
                p.out.push(')');
            }
        }
    }
    p.out.push_str("] (outputs");
    if let Some(r) = &s.ret {
        p.out.push_str(" (ret ");
        p.expr(r, Some(OUTPUT_WIDTH));
        p.out.push(')');
    }
    for o in &s.outputs {
        let _ = write!(p.out, " (out {} {} {} ", quote(&o.path), o.region, o.offset);
        p.expr(&o.value, Some(OUTPUT_WIDTH));
        p.out.push(')');
    }
    p.out.push(')');
    match &s.terminal {
        Terminal::Return => {}
        Terminal::Panic(code) => {
            let _ = write!(p.out, " (panic {code})");
        }
        Terminal::Exhausted => p.out.push_str(" (exhausted)"),
    }
    p.out.push(')');
    p.out
}

/// Canonical text of a lone expression, printed as an output value.
pub fn expr_to_kquery(e: &SymExpr) -> String {
    let mut p = Printer::new(&[e]);
    p.expr(e, Some(OUTPUT_WIDTH));
    p.out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    LBrack,
    RBrack,
    Colon,
    Str(String),
    Atom(String),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

fn is_atom_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | '[' | ']' | ':' | '"')
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, KqueryError> {
        let mut lx = Lexer {
            src,
            toks: Vec::new(),
        };
        let mut it = src.char_indices().peekable();
        while let Some((i, c)) = it.next() {
            let tok = match c {
                c if c.is_whitespace() => continue,
                '(' => Tok::Open,
                ')' => Tok::Close,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                ':' => Tok::Colon,
                '"' => {
                    let mut s = String::new();
                    loop {
                        match it.next() {
                            None => return Err(lx.error(i, "unterminated string")),
                            Some((_, '"')) => break,
                            Some((_, '\\')) => match it.next() {
                                Some((_, c)) => s.push(c),
                                None => return Err(lx.error(i, "unterminated string")),
                            },
                            Some((_, c)) => s.push(c),
                        }
                    }
                    Tok::Str(s)
                }
                c => {
                    let mut s = String::from(c);
                    while let Some(&(_, d)) = it.peek() {
                        if !is_atom_char(d) {
                            break;
                        }
                        s.push(d);
                        it.next();
                    }
                    Tok::Atom(s)
                }
            };
            lx.toks.push((tok, i));
        }
        Ok(lx.toks)
    }

    fn error(&self, pos: usize, msg: &str) -> KqueryError {
        position_error(self.src, pos, msg.to_string())
    }
}

fn position_error(src: &str, pos: usize, msg: String) -> KqueryError {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.chars().count(), |n| before[n + 1..].chars().count())
        + 1;
    KqueryError { line, col, msg }
}

/// A parsed operand that may still be waiting for its implied width.
enum Parsed {
    Typed(SymExpr),
    Bare(String, usize),
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    at: usize,
    labels: HashMap<String, SymExpr>,
}

fn parse_width(s: &str) -> Option<u32> {
    let w: u32 = s.strip_prefix('w')?.parse().ok()?;
    (1..=64).contains(&w).then_some(w)
}

fn is_label(s: &str) -> bool {
    s.len() > 1 && s.starts_with('N') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

impl<'a> Parser<'a> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.src.len(), |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, KqueryError> {
        Err(position_error(self.src, self.pos(), msg.into()))
    }

    fn err_at<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, KqueryError> {
        Err(position_error(self.src, pos, msg.into()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.0.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), KqueryError> {
        if self.peek() == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn atom(&mut self, what: &str) -> Result<String, KqueryError> {
        match self.peek() {
            Some(Tok::Atom(a)) => {
                let a = a.clone();
                self.at += 1;
                Ok(a)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), KqueryError> {
        let p = self.pos();
        match self.atom(kw)? {
            a if a == kw => Ok(()),
            a => self.err_at(p, format!("expected '{kw}', found '{a}'")),
        }
    }

    fn width(&mut self) -> Result<u32, KqueryError> {
        let p = self.pos();
        let a = self.atom("a width")?;
        parse_width(&a).map_or_else(|| self.err_at(p, format!("bad width '{a}'")), Ok)
    }

    fn leaf(&self, atom: &str, pos: usize, w: u32) -> Result<SymExpr, KqueryError> {
        if atom.bytes().all(|b| b.is_ascii_digit()) {
            let v: u64 = match atom.parse() {
                Ok(v) => v,
                Err(_) => return self.err_at(pos, format!("constant '{atom}' out of range")),
            };
            if mask(v, w) != v {
                return self.err_at(pos, format!("width mismatch: {v} does not fit in w{w}"));
            }
            return Ok(SymExpr::constant(v, w));
        }
        if let Some(rest) = atom.strip_prefix("ext.") {
            if let Some((callee, seq)) = rest.rsplit_once('#') {
                if let Ok(seq) = seq.parse() {
                    return Ok(SymExpr::ext_call(callee, seq, w));
                }
            }
            return self.err_at(pos, format!("malformed call result '{atom}'"));
        }
        Ok(SymExpr::sym(atom, w))
    }

    fn resolve(&self, p: Parsed, w: u32) -> Result<SymExpr, KqueryError> {
        match p {
            Parsed::Typed(e) => Ok(e),
            Parsed::Bare(a, pos) => self.leaf(&a, pos, w),
        }
    }

    fn resolve_pair(&self, a: Parsed, b: Parsed) -> Result<(SymExpr, SymExpr), KqueryError> {
        let w = match (&a, &b) {
            (Parsed::Typed(e), _) | (_, Parsed::Typed(e)) => e.width(),
            _ => PAIR_WIDTH,
        };
        Ok((self.resolve(a, w)?, self.resolve(b, w)?))
    }

    fn typed(&mut self, w: u32) -> Result<SymExpr, KqueryError> {
        let p = self.operand()?;
        self.resolve(p, w)
    }

    fn close_of(&mut self, op: &str, arity: usize) -> Result<(), KqueryError> {
        if self.peek() == Some(&Tok::Close) {
            self.at += 1;
            return Ok(());
        }
        if self.peek().is_none() {
            return self.err("unexpected end of input");
        }
        self.err(format!("arity error: {op} takes {arity} operands"))
    }

    fn operand_or_arity(&mut self, op: &str, arity: usize) -> Result<Parsed, KqueryError> {
        if self.peek() == Some(&Tok::Close) {
            return self.err(format!("arity error: {op} takes {arity} operands"));
        }
        self.operand()
    }

    fn operand(&mut self) -> Result<Parsed, KqueryError> {
        let start = self.pos();
        match self.next() {
            Some(Tok::Atom(a)) if is_label(&a) => {
                if self.peek() == Some(&Tok::Colon) {
                    self.at += 1;
                    let e = match self.operand()? {
                        Parsed::Typed(e) if !e.is_leaf() => e,
                        _ => return self.err_at(start, "a label must name a compound expression"),
                    };
                    if self.labels.insert(a.clone(), e.clone()).is_some() {
                        return self.err_at(start, format!("label '{a}' defined twice"));
                    }
                    Ok(Parsed::Typed(e))
                } else {
                    match self.labels.get(&a) {
                        Some(e) => Ok(Parsed::Typed(e.clone())),
                        None => self.err_at(start, format!("undefined label '{a}'")),
                    }
                }
            }
            Some(Tok::Atom(a)) => Ok(Parsed::Bare(a, start)),
            Some(Tok::Open) => {
                let op_pos = self.pos();
                let op = self.atom("an operator")?;
                if let Some(w) = parse_width(&op) {
                    let p = self.pos();
                    let a = self.atom("a leaf")?;
                    if is_label(&a) {
                        return self.err_at(p, "a width annotation applies to leaves only");
                    }
                    let e = self.leaf(&a, p, w)?;
                    self.close_of(&op, 1)?;
                    return Ok(Parsed::Typed(e));
                }
                let e = if let Some(u) = UnOp::from_name(&op) {
                    let w = self.width()?;
                    let p = self.pos();
                    let a = self.operand_or_arity(&op, 1)?;
                    let a = match a {
                        Parsed::Bare(_, _) if u.is_cast() => {
                            return self.err_at(p, "a cast operand needs a width annotation")
                        }
                        other => self.resolve(other, w)?,
                    };
                    self.close_of(&op, 1)?;
                    SymExpr::try_unary(u, a, w)
                } else if let Some(b) = BinKind::from_name(&op) {
                    if b.is_compare() {
                        let a = self.operand_or_arity(&op, 2)?;
                        let c = self.operand_or_arity(&op, 2)?;
                        self.close_of(&op, 2)?;
                        let (a, c) = self.resolve_pair(a, c)?;
                        SymExpr::try_binary(b, a, c)
                    } else {
                        let w = self.width()?;
                        let a = self.operand_or_arity(&op, 2)?;
                        let a = self.resolve(a, w)?;
                        let c = self.operand_or_arity(&op, 2)?;
                        let c = self.resolve(c, w)?;
                        self.close_of(&op, 2)?;
                        match SymExpr::try_binary(b, a, c) {
                            Ok(e) if e.width() != w => {
                                Err(format!("width mismatch: {op} declared w{w}"))
                            }
                            r => r,
                        }
                    }
                } else if op == "Read" {
                    let w = self.width()?;
                    let off = self.operand_or_arity(&op, 2)?;
                    let off = self.resolve(off, 64)?;
                    let region = self.atom("a region name")?;
                    self.close_of(&op, 2)?;
                    SymExpr::try_read(region, off, w)
                } else if op == "Ite" {
                    let c = self.operand_or_arity(&op, 3)?;
                    let c = self.resolve(c, 1)?;
                    let a = self.operand_or_arity(&op, 3)?;
                    let b = self.operand_or_arity(&op, 3)?;
                    self.close_of(&op, 3)?;
                    let (a, b) = self.resolve_pair(a, b)?;
                    SymExpr::try_ite(c, a, b)
                } else {
                    return self.err_at(op_pos, format!("unknown opcode '{op}'"));
                };
                e.map(Parsed::Typed).or_else(|m| self.err_at(op_pos, m))
            }
            Some(_) => self.err_at(start, "expected an expression"),
            None => self.err_at(start, "unexpected end of input"),
        }
    }

    fn constraint(&mut self) -> Result<Constraint, KqueryError> {
        let is_check = self.peek() == Some(&Tok::Open)
            && matches!(self.toks.get(self.at + 1), Some((Tok::Atom(a), _)) if a == "Check");
        if is_check {
            self.at += 2;
            let p = self.pos();
            let k = self.atom("a check kind")?;
            let kind = CheckKind::from_name(&k)
                .map_or_else(|| self.err_at(p, format!("unknown check '{k}'")), Ok)?;
            let e = self.bit()?;
            self.close_of("Check", 2)?;
            return Ok(Constraint::check(kind, e));
        }
        Ok(Constraint::branch(self.bit()?))
    }

    fn bit(&mut self) -> Result<SymExpr, KqueryError> {
        let p = self.pos();
        let e = self.typed(1)?;
        if e.width() != 1 {
            return self.err_at(
                p,
                format!("width mismatch: constraint has width {}", e.width()),
            );
        }
        Ok(e)
    }

    fn query(&mut self) -> Result<PathSummary, KqueryError> {
        self.expect(Tok::Open, "'('")?;
        self.keyword("query")?;
        self.expect(Tok::LBrack, "'['")?;
        let mut constraints = Vec::new();
        while self.peek() != Some(&Tok::RBrack) {
            if self.peek().is_none() {
                return self.err("unexpected end of input");
            }
            constraints.push(self.constraint()?);
        }
        self.at += 1;
        self.expect(Tok::Open, "'('")?;
        self.keyword("outputs")?;
        let mut ret = None;
        let mut outputs = Vec::new();
        while self.peek() == Some(&Tok::Open) {
            self.at += 1;
            let p = self.pos();
            match self.atom("'ret' or 'out'")?.as_str() {
                "ret" if ret.is_none() && outputs.is_empty() => {
                    ret = Some(self.typed(OUTPUT_WIDTH)?);
                    self.close_of("ret", 1)?;
                }
                "out" => {
                    let path = match self.next() {
                        Some(Tok::Str(s)) => s,
                        _ => return self.err_at(p, "expected a quoted output path"),
                    };
                    let region = self.atom("a region name")?;
                    let op = self.pos();
                    let offset: u64 = self
                        .atom("an offset")?
                        .parse()
                        .map_or_else(|_| self.err_at(op, "bad offset"), Ok)?;
                    let value = self.typed(OUTPUT_WIDTH)?;
                    self.close_of("out", 4)?;
                    outputs.push(OutputBinding {
                        path,
                        region,
                        offset,
                        value,
                    });
                }
                other => return self.err_at(p, format!("unexpected '{other}' in outputs")),
            }
        }
        self.expect(Tok::Close, "')'")?;
        let terminal = if self.peek() == Some(&Tok::Open) {
            self.at += 1;
            let p = self.pos();
            let t = match self.atom("a terminal")?.as_str() {
                "panic" => Terminal::Panic(self.atom("a panic code")?),
                "exhausted" => Terminal::Exhausted,
                other => return self.err_at(p, format!("unknown terminal '{other}'")),
            };
            self.expect(Tok::Close, "')'")?;
            t
        } else {
            Terminal::Return
        };
        self.expect(Tok::Close, "')'")?;
        Ok(PathSummary {
            constraints,
            ret,
            outputs,
            terminal,
        })
    }
}

fn parser(text: &str) -> Result<Parser<'_>, KqueryError> {
    Ok(Parser {
        src: text,
        toks: Lexer::run(text)?,
        at: 0,
        labels: HashMap::new(),
    })
}

/// Parses one query.
pub fn parse_kquery(text: &str) -> Result<PathSummary, KqueryError> {
    let mut p = parser(text)?;
    let s = p.query()?;
    if p.peek().is_some() {
        return p.err("trailing input after query");
    }
    Ok(s)
}

/// Parses a sequence of queries (one file per function side).
pub fn parse_kquery_file(text: &str) -> Result<Vec<PathSummary>, KqueryError> {
    let mut p = parser(text)?;
    let mut out = Vec::new();
    while p.peek().is_some() {
        p.labels.clear();
        out.push(p.query()?);
    }
    Ok(out)
}

/// Parses a lone expression in output position.
pub fn parse_expr(text: &str) -> Result<SymExpr, KqueryError> {
    let mut p = parser(text)?;
    let e = p.typed(OUTPUT_WIDTH)?;
    if p.peek().is_some() {
        return p.err("trailing input after expression");
    }
    Ok(e)
}
