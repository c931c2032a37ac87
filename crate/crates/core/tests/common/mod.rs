// SPDX-License-Identifier: Apache-2.0

//! Shared integration-test support.
#![allow(dead_code)]

pub mod brute;
pub mod gen;
pub mod oracle;
pub mod scripted;

use std::path::PathBuf;

use s3diff::mir::{parse_ir, IrFunction, Module};
use s3diff::s3::{score_function, S3Report, ScoreConfig};
use s3diff::symexec::{execute, ExecConfig, ExecResult, Terminal};
use s3diff::symgraph::{align_result, AlignedSide, AlignmentSpec};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn module(text: &str) -> Module {
    parse_ir(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

/// Every fixture file name, sorted.
pub fn fixture_files() -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(fixture_path(""))
        .expect("fixtures")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".mir"))
        .collect();
    v.sort();
    v
}

pub fn run(m: &Module, f: &IrFunction, cfg: &ExecConfig) -> (ExecResult, AlignedSide) {
    let r = execute(f, &m.records, cfg).unwrap_or_else(|e| panic!("{}: {e}", f.name));
    let side = align_result(&r, &AlignmentSpec::for_function(f, &m.records));
    (r, side)
}

/// Scores the function `name` of two module texts.
pub fn score_texts(
    c: &str,
    rust: &str,
    name: &str,
    exec: &ExecConfig,
    score: &ScoreConfig,
) -> S3Report {
    let (mc, mr) = (module(c), module(rust));
    let fc = mc
        .function(name)
        .unwrap_or_else(|| panic!("c side lacks {name}"));
    let fr = mr
        .function(name)
        .unwrap_or_else(|| panic!("rust side lacks {name}"));
    let (_, sc) = run(&mc, fc, exec);
    let (_, sr) = run(&mr, fr, exec);
    score_function(&sc, &sr, name, score)
}

/// Scores a fixture pair `<stem>.c.mir` / `<stem>.rust.mir`.
pub fn score_fixture(stem: &str, name: &str, exec: &ExecConfig) -> S3Report {
    score_texts(
        &fixture(&format!("{stem}.c.mir")),
        &fixture(&format!("{stem}.rust.mir")),
        name,
        exec,
        &ScoreConfig::default(),
    )
}

fn terminal_matches(t: &Terminal, o: &oracle::Outcome) -> bool {
    match (t, o) {
        (Terminal::Return, oracle::Outcome::Return(_)) => true,
        (Terminal::Panic(a), oracle::Outcome::Panic(b)) => a == b,
        _ => false,
    }
}

/// Checks path soundness of one integer-only function: under every
/// valuation of its parameters exactly one summary's constraints hold, and
/// that summary ends the way the concrete run does with the same value.
/// Returns the number of valuations checked.
pub fn check_soundness(f: &IrFunction, r: &ExecResult) -> Result<u64, String> {
    if r.incomplete {
        return Err(format!("{}: exploration incomplete", f.name));
    }
    let widths: Vec<u32> = f
        .params
        .iter()
        .map(|p| p.ty.int_width().expect("integer params"))
        .collect();
    let bits: u32 = widths.iter().sum();
    if bits > 16 {
        return Err(format!("{}: {bits} input bits", f.name));
    }
    // one tape for all guards and return values; roots laid out per summary
    let mut roots = Vec::new();
    let mut layout = Vec::new();
    for s in &r.summaries {
        let start = roots.len();
        roots.extend(s.constraints.iter().map(|c| c.expr.clone()));
        let has_ret = s.ret.is_some();
        roots.extend(s.ret.iter().cloned());
        layout.push((start, s.constraints.len(), has_ret));
    }
    let tape = oracle::Tape::new(&roots);
    let sym_index: Vec<Option<usize>> = tape
        .symbols
        .iter()
        .map(|(n, _)| n.strip_prefix("arg").and_then(|k| k.parse().ok()))
        .collect();
    if sym_index.iter().any(Option::is_none) || !tape.bytes.is_empty() {
        return Err(format!(
            "{}: summaries mention non-parameter inputs",
            f.name
        ));
    }
    let mut scratch = Vec::new();
    let mut syms = vec![0u64; tape.symbols.len()];
    for v in 0..(1u64 << bits) {
        let mut args = Vec::with_capacity(widths.len());
        let mut rest = v;
        for &w in &widths {
            args.push(rest & ((1u64 << w) - 1));
            rest >>= w;
        }
        for (slot, k) in syms.iter_mut().zip(&sym_index) {
            *slot = args[k.expect("checked")];
        }
        let vals = tape.eval(&syms, &[], &mut scratch);
        let expected = oracle::run(f, &args);
        let hits: Vec<usize> = layout
            .iter()
            .enumerate()
            .filter(|(_, (start, n, _))| vals[*start..*start + *n].iter().all(|&c| c & 1 == 1))
            .map(|(i, _)| i)
            .collect();
        if hits.len() != 1 {
            return Err(format!(
                "{}: args {args:?} satisfy {} summaries",
                f.name,
                hits.len()
            ));
        }
        let (start, n, has_ret) = layout[hits[0]];
        let s = &r.summaries[hits[0]];
        if !terminal_matches(&s.terminal, &expected) {
            return Err(format!(
                "{}: args {args:?}: summary ends {} but the run gives {expected:?}",
                f.name, s.terminal
            ));
        }
        if let oracle::Outcome::Return(Some(x)) = expected {
            let got = if has_ret { Some(vals[start + n]) } else { None };
            let w = f.ret.int_width().expect("integer result");
            if got.map(|g| oracle::mask(g, w)) != Some(x) {
                return Err(format!(
                    "{}: args {args:?}: summary returns {got:?}, run returns {x}",
                    f.name
                ));
            }
        }
    }
    Ok(1u64 << bits)
}
