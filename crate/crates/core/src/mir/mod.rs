// SPDX-License-Identifier: Apache-2.0

//! Dual-dialect mini intermediate representation.
//!
//! One instruction set serves both dialects. C-dialect functions may not use
//! the checked instructions (`checked-*`, `bounds-checked-index`,
//! `option-unwrap`); Rust-dialect functions may use everything.

mod layout;
mod parse;
mod print;
mod types;
mod validate;

pub use layout::{field_offset, layout_of, size_of, LayoutEntry};
pub use parse::parse_ir;
pub use print::{print_function, print_ir};
pub use types::*;
pub use validate::validate_module;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MirError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: '{opcode}' is not allowed in c-dialect function '{function}'")]
    Dialect {
        line: usize,
        col: usize,
        function: String,
        opcode: String,
    },
    #[error("{line}:{col}: undefined value '{name}' in function '{function}'")]
    Undefined {
        line: usize,
        col: usize,
        function: String,
        name: String,
    },
    #[error("{line}:{col}: type error in function '{function}': {msg}")]
    Type {
        line: usize,
        col: usize,
        function: String,
        msg: String,
    },
    #[error("malformed definition in '{function}': {msg}")]
    Structure { function: String, msg: String },
}

impl MirError {
    pub(crate) fn syntax(line: usize, col: usize, msg: impl Into<String>) -> MirError {
        MirError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }
}
