// SPDX-License-Identifier: Apache-2.0

//! Parser for the textual mini-IR. See `docs/mir.md` for the grammar.

use super::types::*;
use super::validate::{validate_module_with, Locations};
use super::MirError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(i128),
    Punct(char),
    Arrow,
    Newline,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, MirError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: start.0,
                col: start.1,
            })
        };
        match c {
            '\n' => {
                push(&mut out, Tok::Newline);
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {}
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                push(&mut out, Tok::Arrow);
                i += 2;
                col += 2;
                continue;
            }
            '-' | '0'..='9' => {
                let neg = c == '-';
                let mut j = if neg { i + 1 } else { i };
                if j >= chars.len() || !chars[j].is_ascii_digit() {
                    return Err(MirError::syntax(line, col, "expected digit after '-'"));
                }
                let value: i128;
                if chars[j] == '0' && matches!(chars.get(j + 1), Some('x') | Some('X')) {
                    j += 2;
                    let s = j;
                    while j < chars.len() && chars[j].is_ascii_hexdigit() {
                        j += 1;
                    }
                    let digits: String = chars[s..j].iter().collect();
                    value = i128::from_str_radix(&digits, 16)
                        .map_err(|_| MirError::syntax(line, col, "bad hex literal"))?;
                } else {
                    let s = j;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let digits: String = chars[s..j].iter().collect();
                    value = digits
                        .parse()
                        .map_err(|_| MirError::syntax(line, col, "bad integer literal"))?;
                }
                if value > i128::from(u64::MAX) {
                    return Err(MirError::syntax(line, col, "integer literal out of range"));
                }
                push(&mut out, Tok::Num(if neg { -value } else { value }));
                col += j - i;
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j];
                    let hyphen =
                        d == '-' && chars.get(j + 1).is_some_and(|n| n.is_ascii_alphabetic());
                    if d.is_ascii_alphanumeric() || d == '_' || d == '.' || hyphen {
                        j += 1;
                    } else {
                        break;
                    }
                }
                push(&mut out, Tok::Ident(chars[i..j].iter().collect()));
                col += j - i;
                i = j;
                continue;
            }
            '(' | ')' | '{' | '}' | '[' | ']' | '<' | '>' | ',' | ':' | ';' | '=' | '*' => {
                push(&mut out, Tok::Punct(c));
            }
            other => {
                return Err(MirError::syntax(
                    line,
                    col,
                    format!("unexpected character {other:?}"),
                ));
            }
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.eof)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, MirError> {
        let (l, c) = self.loc();
        Err(MirError::syntax(l, c, msg))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn is_sep(&self) -> bool {
        matches!(self.peek(), Some(Tok::Newline) | Some(Tok::Punct(';')))
    }

    fn skip_seps(&mut self) {
        while self.is_sep() {
            self.pos += 1;
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), MirError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, MirError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), MirError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected '{kw}'")),
        }
    }

    fn number(&mut self) -> Result<i128, MirError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected integer"),
        }
    }

    fn ty(&mut self) -> Result<IrType, MirError> {
        if self.eat_punct('*') {
            return Ok(IrType::ptr(self.ty()?));
        }
        if self.eat_punct('[') {
            let elem = self.ty()?;
            self.expect_punct(';')?;
            let n = self.number()?;
            if n < 0 {
                return self.err("array length must be non-negative");
            }
            self.expect_punct(']')?;
            return Ok(IrType::Array(Box::new(elem), n as u64));
        }
        let name = self.ident()?;
        Ok(match name.as_str() {
            "str" => IrType::StrSlice,
            "vec" => IrType::ByteVec,
            "unit" => IrType::Unit,
            "opt" => {
                self.expect_punct('<')?;
                let inner = self.ty()?;
                self.expect_punct('>')?;
                IrType::opt(inner)
            }
            s if s.starts_with('i') && s[1..].parse::<u32>().is_ok() => {
                let w: u32 = s[1..].parse().unwrap_or(0);
                if !INT_WIDTHS.contains(&w) {
                    return Err(MirError::syntax(
                        self.loc().0,
                        self.loc().1,
                        format!("unsupported integer width {w}"),
                    ));
                }
                IrType::Int(w)
            }
            _ => IrType::Record(name),
        })
    }

    fn operand(&mut self) -> Result<Operand, MirError> {
        match self.next() {
            Some(Tok::Ident(s)) if s == "null" => Ok(Operand::Null),
            Some(Tok::Ident(s)) => Ok(Operand::Value(s)),
            Some(Tok::Num(n)) => Ok(Operand::Lit(n as u64)),
            _ => {
                self.pos -= 1;
                self.err("expected operand")
            }
        }
    }

    fn two_operands(&mut self) -> Result<(Operand, Operand), MirError> {
        let a = self.operand()?;
        self.expect_punct(',')?;
        let b = self.operand()?;
        Ok((a, b))
    }

    fn int_width(&mut self) -> Result<u32, MirError> {
        match self.ty()? {
            IrType::Int(w) => Ok(w),
            _ => self.err("expected integer type"),
        }
    }

    fn op(&mut self, mnemonic: &str) -> Result<Op, MirError> {
        if let Some(op) = BinOp::from_mnemonic(mnemonic) {
            let (lhs, rhs) = self.two_operands()?;
            return Ok(Op::Bin { op, lhs, rhs });
        }
        let checked = |name: &str| -> Option<(CheckedOp, bool)> {
            let (base, sign) = name.rsplit_once('.')?;
            let op = match base {
                "checked-add" => CheckedOp::Add,
                "checked-sub" => CheckedOp::Sub,
                "checked-mul" => CheckedOp::Mul,
                _ => return None,
            };
            match sign {
                "s" => Some((op, true)),
                "u" => Some((op, false)),
                _ => None,
            }
        };
        if let Some((op, signed)) = checked(mnemonic) {
            let (lhs, rhs) = self.two_operands()?;
            return Ok(Op::Checked {
                op,
                signed,
                lhs,
                rhs,
            });
        }
        Ok(match mnemonic {
            "const" => {
                let ty = self.ty()?;
                let value = self.number()? as u64;
                Op::Const { ty, value }
            }
            "icmp" => {
                let p = self.ident()?;
                let Some(pred) = Pred::from_mnemonic(&p) else {
                    return self.err(format!("unknown predicate '{p}'"));
                };
                let (lhs, rhs) = self.two_operands()?;
                Op::Icmp { pred, lhs, rhs }
            }
            "zext" | "sext" | "trunc" => {
                let kind = match mnemonic {
                    "zext" => CastKind::ZExt,
                    "sext" => CastKind::SExt,
                    _ => CastKind::Trunc,
                };
                let to = self.int_width()?;
                let value = self.operand()?;
                Op::Cast { kind, to, value }
            }
            "alloc" => Op::Alloc { ty: self.ty()? },
            "load" => {
                let ty = self.ty()?;
                let ptr = self.operand()?;
                Op::Load { ty, ptr }
            }
            "store" => {
                let (value, ptr) = self.two_operands()?;
                Op::Store { value, ptr }
            }
            "field-addr" => {
                let base = self.operand()?;
                self.expect_punct(',')?;
                let field = self.ident()?;
                Op::FieldAddr { base, field }
            }
            "index-addr" => {
                let (base, index) = self.two_operands()?;
                Op::IndexAddr { base, index }
            }
            "bounds-checked-index" => {
                let (base, index) = self.two_operands()?;
                Op::BoundsCheckedIndex { base, index }
            }
            "option-unwrap" => Op::OptionUnwrap {
                value: self.operand()?,
            },
            "call" => {
                let ret = self.ty()?;
                let callee = self.ident()?;
                self.expect_punct('(')?;
                let mut args = Vec::new();
                if !self.eat_punct(')') {
                    loop {
                        args.push(self.operand()?);
                        if self.eat_punct(')') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                Op::Call { ret, callee, args }
            }
            other => return self.err(format!("unknown opcode '{other}'")),
        })
    }

    fn record(&mut self, module: &mut Module) -> Result<(), MirError> {
        self.keyword("type")?;
        let (line, col) = self.loc();
        let name = self.ident()?;
        self.expect_punct('=')?;
        self.expect_punct('{')?;
        let mut fields = Vec::new();
        loop {
            self.skip_seps();
            if self.eat_punct('}') {
                break;
            }
            let f = self.ident()?;
            self.expect_punct(':')?;
            let t = self.ty()?;
            fields.push((f, t));
            self.skip_seps();
            if !self.eat_punct(',') {
                self.skip_seps();
                self.expect_punct('}')?;
                break;
            }
        }
        if module.records.contains_key(&name) {
            return Err(MirError::syntax(
                line,
                col,
                format!("duplicate record '{name}'"),
            ));
        }
        module
            .records
            .insert(name.clone(), RecordDef { name, fields });
        Ok(())
    }

    fn function(&mut self, locs: &mut Locations) -> Result<IrFunction, MirError> {
        self.keyword("fn")?;
        let dialect = match self.ident()?.as_str() {
            "c" => Dialect::C,
            "rust" => Dialect::Rust,
            other => return self.err(format!("unknown dialect '{other}'")),
        };
        let name = self.ident()?;
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if !self.eat_punct(')') {
            loop {
                let mut out = false;
                if matches!(self.peek(), Some(Tok::Ident(s)) if s == "out")
                    && matches!(self.peek_at(1), Some(Tok::Ident(_)))
                {
                    self.pos += 1;
                    out = true;
                }
                let pname = self.ident()?;
                self.expect_punct(':')?;
                let ty = self.ty()?;
                params.push(Param {
                    name: pname,
                    ty,
                    out,
                });
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        if self.peek() != Some(&Tok::Arrow) {
            return self.err("expected '->'");
        }
        self.pos += 1;
        let ret = self.ty()?;
        self.expect_punct('{')?;

        let mut blocks: Vec<Block> = Vec::new();
        let mut block_locs: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut current: Option<(String, Vec<Instr>, Vec<(usize, usize)>)> = None;
        loop {
            self.skip_seps();
            if self.eat_punct('}') {
                break;
            }
            if self.peek().is_none() {
                return self.err("unexpected end of input inside function body");
            }
            // label
            if matches!(self.peek(), Some(Tok::Ident(_)))
                && self.peek_at(1) == Some(&Tok::Punct(':'))
            {
                if let Some((label, _, _)) = &current {
                    return self.err(format!("block '{label}' has no terminator"));
                }
                let label = self.ident()?;
                self.pos += 1;
                current = Some((label, Vec::new(), Vec::new()));
                continue;
            }
            let loc = self.loc();
            let Some((_, instrs, ilocs)) = current.as_mut() else {
                return self.err("instruction outside of a block");
            };
            let first = self.ident()?;
            let term = match first.as_str() {
                "ret" => {
                    if self.is_sep() || self.peek() == Some(&Tok::Punct('}')) {
                        Some(Terminator::Ret(None))
                    } else {
                        Some(Terminator::Ret(Some(self.operand()?)))
                    }
                }
                "jmp" => Some(Terminator::Jmp(self.ident()?)),
                "br" => {
                    let cond = self.operand()?;
                    self.expect_punct(',')?;
                    let then_label = self.ident()?;
                    self.expect_punct(',')?;
                    let else_label = self.ident()?;
                    Some(Terminator::Br {
                        cond,
                        then_label,
                        else_label,
                    })
                }
                "panic" => Some(Terminator::Panic(match self.next() {
                    Some(Tok::Ident(s)) => s,
                    Some(Tok::Num(n)) => n.to_string(),
                    _ => {
                        self.pos -= 1;
                        return self.err("expected panic code");
                    }
                })),
                _ => None,
            };
            if let Some(term) = term {
                let (label, instrs, mut ilocs) = current.take().expect("block open");
                ilocs.push(loc);
                blocks.push(Block {
                    label,
                    instrs,
                    term,
                });
                block_locs.push(ilocs);
            } else {
                let (result, mnemonic) = if self.eat_punct('=') {
                    (Some((first, IrType::Unit)), self.ident()?)
                } else {
                    (None, first)
                };
                let op = self.op(&mnemonic)?;
                instrs.push(Instr { result, op });
                ilocs.push(loc);
            }
            if !self.is_sep() && self.peek() != Some(&Tok::Punct('}')) {
                return self.err("expected end of statement");
            }
        }
        if let Some((label, _, _)) = current {
            return self.err(format!("block '{label}' has no terminator"));
        }
        if blocks.is_empty() {
            return self.err(format!("function '{name}' has no blocks"));
        }
        locs.insert(name.clone(), block_locs);
        Ok(IrFunction {
            name,
            dialect,
            params,
            ret,
            blocks,
        })
    }
}

/// Parses a whole program and validates every function.
pub fn parse_ir(text: &str) -> Result<Module, MirError> {
    let toks = lex(text)?;
    let eof = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, eof };
    let mut module = Module::default();
    let mut locs = Locations::new();
    loop {
        p.skip_seps();
        match p.peek() {
            None => break,
            Some(Tok::Ident(s)) if s == "type" => p.record(&mut module)?,
            Some(Tok::Ident(s)) if s == "fn" => {
                let (line, col) = p.loc();
                let f = p.function(&mut locs)?;
                if module.function(&f.name).is_some() {
                    return Err(MirError::syntax(
                        line,
                        col,
                        format!("duplicate function '{}'", f.name),
                    ));
                }
                module.functions.push(f);
            }
            _ => return p.err("expected 'fn' or 'type'"),
        }
    }
    validate_module_with(&mut module, Some(&locs))?;
    Ok(module)
}
