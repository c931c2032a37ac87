// SPDX-License-Identifier: Apache-2.0

//! Prompt templates. The wording is our own reconstruction; bump
//! [`PROMPT_VERSION`] whenever a template changes so cached struct
//! translations are invalidated.

use std::fmt::Write as _;

use super::context::{ContextFragment, FieldUse, FragmentKind};
use super::feedback::UnsafeFinding;

pub const PROMPT_VERSION: &str = "v1";

/// A record definition as embedded in function prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordText<'a> {
    Translated(&'a str),
    /// Pre-translation failed; the C definition is passed through.
    Untranslated(&'a str),
}

pub fn struct_prompt(
    name: &str,
    c_def: &str,
    deps: &[(String, String)],
    usage: &[(String, Vec<FieldUse>)],
) -> String {
    let mut p = format!(
        "[s3diff prompt {PROMPT_VERSION}: struct]\nTranslate the C record `{name}` into an idiomatic, safe Rust type definition.\n"
    );
    if !deps.is_empty() {
        p.push_str("\nThese Rust definitions already exist; refer to them by name:\n");
        for (n, d) in deps {
            let _ = writeln!(p, "// {n}\n{}", d.trim_end());
        }
    }
    let _ = write!(p, "\nC definition:\n```c\n{}\n```\n", c_def.trim_end());
    for (field, uses) in usage {
        let _ = writeln!(
            p,
            "\nField `{field}` is a byte sequence. Choose an idiomatic container type for it from how it is used:"
        );
        if uses.is_empty() {
            p.push_str("(no uses in this unit)\n");
        }
        for u in uses {
            let _ = writeln!(p, "- in {}: {}", u.function, u.snippet);
        }
    }
    p.push_str(
        "\nAnswer with a single ```rust fenced block containing only the type definition.\n",
    );
    p
}

pub fn render_context<'a>(
    context: &[ContextFragment],
    record: &dyn Fn(&str) -> Option<RecordText<'a>>,
) -> String {
    let mut p = String::new();
    for f in context {
        match (f.kind, record(&f.name)) {
            (FragmentKind::Record, Some(RecordText::Translated(t))) => {
                let _ = writeln!(
                    p,
                    "// use this pre-generated definition for `{}`:\n{}",
                    f.name,
                    t.trim_end()
                );
            }
            (FragmentKind::Record, Some(RecordText::Untranslated(c))) => {
                let _ = writeln!(
                    p,
                    "// untranslated C definition of `{}`:\n{}",
                    f.name,
                    c.trim_end()
                );
            }
            _ => {
                let _ = writeln!(p, "{}", f.text.trim_end());
            }
        }
    }
    p
}

/// Prompt for a whole function, or for chunk `part` of `parts` when the
/// function was split.
pub fn function_prompt<'a>(
    name: &str,
    context: &[ContextFragment],
    record: &dyn Fn(&str) -> Option<RecordText<'a>>,
    body: &str,
    part: Option<(usize, usize)>,
) -> String {
    let mut p = format!("[s3diff prompt {PROMPT_VERSION}: function]\nTranslate the C function `{name}` into safe, idiomatic Rust.\n");
    let ctx = render_context(context, record);
    if !ctx.is_empty() {
        let _ = write!(p, "\nContext:\n```\n{ctx}```\n");
    }
    if let Some((k, n)) = part {
        let _ = writeln!(p, "\n{}", continuation_marker(k, n));
    }
    let _ = write!(p, "\nC source:\n```c\n{body}\n```\n");
    p.push_str("\nAnswer with a single ```rust fenced block.\n");
    p
}

/// Marker telling the model which part of a split function it sees.
pub fn continuation_marker(k: usize, n: usize) -> String {
    format!("/* part {k} of {n}: translate only this part, continuing the previous parts */")
}

pub fn compile_fix_prompt(
    name: &str,
    c_source: &str,
    candidate: &str,
    diagnostics: &str,
) -> String {
    format!(
        "[s3diff prompt {PROMPT_VERSION}: compile-fix]\nThe Rust translation of `{name}` does not compile.\n\nC source:\n```c\n{c_source}\n```\n\nTranslation:\n```rust\n{candidate}\n```\n\nCompiler diagnostics:\n```\n{}\n```\n\nAnswer with a corrected ```rust fenced block.\n",
        diagnostics.trim_end()
    )
}

pub fn unsafe_fix_prompt(
    name: &str,
    c_source: &str,
    candidate: &str,
    findings: &[UnsafeFinding],
) -> String {
    let mut list = String::new();
    for f in findings {
        let _ = writeln!(list, "- line {}: {}", f.line, f.what);
    }
    format!(
        "[s3diff prompt {PROMPT_VERSION}: unsafe-fix]\nThe Rust translation of `{name}` uses unsafe code. Rewrite it without `unsafe` blocks and without the listed calls.\n\nC source:\n```c\n{c_source}\n```\n\nTranslation:\n```rust\n{candidate}\n```\n\nFindings:\n{list}\nAnswer with a corrected ```rust fenced block.\n"
    )
}
