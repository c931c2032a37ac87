// SPDX-License-Identifier: Apache-2.0

//! Context-window management: token estimation and statement-boundary
//! splitting of functions that do not fit one prompt.

use thiserror::Error;

use super::lex::{blank_c, line_of};
use super::llm::extract_code;

/// Conservative token estimate: whitespace-delimited words times 1.3,
/// rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    (text.split_whitespace().count() * 13).div_ceil(10)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChunkError {
    #[error("token budget must be positive")]
    ZeroBudget,
    #[error(
        "statement at line {line} needs {tokens} tokens but at most {room} fit beside the context"
    )]
    StatementTooLarge {
        line: usize,
        tokens: usize,
        room: usize,
    },
}

/// One piece of a function. Concatenating the `text` of all chunks in order
/// reproduces the function exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    /// 1-based position.
    pub part: usize,
    pub parts: usize,
    pub text: String,
}

/// Byte offsets just after each top-level statement of the body, plus the
/// offset after the opening brace.
fn boundaries(src: &str) -> Vec<usize> {
    let b = blank_c(src);
    let bytes = b.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut parens = 0i32;
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'(' => parens += 1,
            b')' => parens -= 1,
            b'{' => {
                depth += 1;
                if depth == 1 {
                    out.push(i + 1);
                }
            }
            b'}' => {
                depth -= 1;
                if depth == 1 && parens == 0 {
                    // `} else`, `} while (..);` continue the statement
                    let rest = b[i + 1..].trim_start();
                    if !rest.starts_with("else") && !rest.starts_with("while") {
                        out.push(i + 1);
                    }
                }
            }
            b';' if depth == 1 && parens == 0 => out.push(i + 1),
            _ => {}
        }
    }
    out
}

/// Splits `source` at top-level statement boundaries so that each chunk
/// plus `context` fits `budget`, packing statements greedily.
/// A function that fits is one chunk.
pub fn chunk_function(
    source: &str,
    context: &str,
    budget: usize,
) -> Result<Vec<Chunk>, ChunkError> {
    if budget == 0 {
        return Err(ChunkError::ZeroBudget);
    }
    let ctx = estimate_tokens(context);
    if ctx + estimate_tokens(source) <= budget {
        return Ok(vec![Chunk {
            part: 1,
            parts: 1,
            text: source.to_string(),
        }]);
    }
    // the budget covers code and context; fixed prompt wording is not counted
    let room = budget.saturating_sub(ctx);
    // pieces between consecutive boundaries; the last runs to the end
    let mut cuts = boundaries(source);
    cuts.retain(|&c| c > 0 && c < source.len());
    let mut pieces = Vec::new();
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(source.len())) {
        if c > start {
            pieces.push((start, c));
            start = c;
        }
    }
    let mut chunks: Vec<(usize, usize)> = Vec::new();
    for (s, e) in pieces {
        let t = estimate_tokens(&source[s..e]);
        if t > room {
            let lead = source[s..e].len() - source[s..e].trim_start().len();
            return Err(ChunkError::StatementTooLarge {
                line: line_of(source, s + lead),
                tokens: t,
                room,
            });
        }
        match chunks.last_mut() {
            Some(last) if estimate_tokens(&source[last.0..e]) <= room => last.1 = e,
            _ => chunks.push((s, e)),
        }
    }
    let parts = chunks.len();
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| Chunk {
            part: i + 1,
            parts,
            text: source[s..e].to_string(),
        })
        .collect())
}

/// Joins chunk responses in order; fenced responses contribute their code.
pub fn reassemble(responses: &[String]) -> String {
    responses.iter().map(|r| extract_code(r)).collect()
}
