// SPDX-License-Identifier: Apache-2.0

//! Symbolizer and path-exploring symbolic executor for mini-IR functions.

mod eval;
mod exec;
mod expr;
mod feasible;
mod memory;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::mir::{Dialect, IrType};

pub use eval::{
    collect_vars, eval_binary, eval_concrete, eval_unary, EvalError, Tape, Valuation, VarKey,
};
pub use exec::{execute, symbolize, Symbolized};
pub use expr::{fold, mask, BinKind, ExprKind, SymExpr, UnOp};
pub use feasible::{check_extension, find_witness, Feasibility};
pub use memory::{Pointer, RegionInfo, RegionKind, Value};

pub(crate) fn ser_type<S: Serializer>(t: &IrType, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_string())
}

/// Exploration limits. All values must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecConfig {
    /// Maximum pointer/record nesting that receives symbolic memory.
    pub depth_limit: u32,
    /// Element count of symbolic buffers and of slice/vector lengths.
    pub slice_length: u64,
    /// Iterations of any loop on one path before it is closed as exhausted.
    pub loop_unroll: u32,
    /// Maximum number of path summaries.
    pub path_cap: usize,
    pub timeout_secs: u64,
    /// Largest total input width the feasibility oracle enumerates.
    pub feasibility_width: u32,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            depth_limit: 10,
            slice_length: 100,
            loop_unroll: 8,
            path_cap: 256,
            timeout_secs: 60,
            feasibility_width: 16,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("depth_limit", u64::from(self.depth_limit)),
            ("slice_length", self.slice_length),
            ("loop_unroll", u64::from(self.loop_unroll)),
            ("path_cap", self.path_cap as u64),
            ("timeout_secs", self.timeout_secs),
            ("feasibility_width", u64::from(self.feasibility_width)),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.feasibility_width > 32 {
            return Err("feasibility_width above 32 is not supported".into());
        }
        Ok(())
    }
}

/// Decides a constraint set with the configured enumeration width.
pub fn check_feasible(constraints: &[SymExpr], cfg: &ExecConfig) -> Feasibility {
    feasible::check_feasible(constraints, cfg.feasibility_width)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no function named '{0}'")]
    NoSuchFunction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Overflow,
    Bounds,
    Unwrap,
    DivZero,
    Memory,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::Overflow,
        CheckKind::Bounds,
        CheckKind::Unwrap,
        CheckKind::DivZero,
        CheckKind::Memory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Overflow => "overflow",
            CheckKind::Bounds => "bounds",
            CheckKind::Unwrap => "unwrap",
            CheckKind::DivZero => "divzero",
            CheckKind::Memory => "memory",
        }
    }

    pub fn from_name(s: &str) -> Option<CheckKind> {
        CheckKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Where a path constraint came from: a program branch, or the guard of a
/// safety check (which has a panic sibling).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Branch,
    Check(CheckKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub expr: SymExpr,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn branch(expr: SymExpr) -> Constraint {
        Constraint {
            expr,
            kind: ConstraintKind::Branch,
        }
    }

    pub fn check(kind: CheckKind, expr: SymExpr) -> Constraint {
        Constraint {
            expr,
            kind: ConstraintKind::Check(kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Terminal {
    Return,
    Panic(String),
    Exhausted,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Return => f.write_str("return"),
            Terminal::Panic(code) => write!(f, "panic({code})"),
            Terminal::Exhausted => f.write_str("budget-exhausted"),
        }
    }
}

/// Value of one written output leaf at a path's end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBinding {
    /// Access path from the parameter, e.g. `arg0.blk_size` or `arg1[0]`.
    pub path: String,
    pub region: String,
    pub offset: u64,
    pub value: SymExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSummary {
    pub constraints: Vec<Constraint>,
    pub ret: Option<SymExpr>,
    pub outputs: Vec<OutputBinding>,
    pub terminal: Terminal,
}

impl PathSummary {
    pub fn output(&self, path: &str) -> Option<&OutputBinding> {
        self.outputs.iter().find(|o| o.path == path)
    }
}

/// Everything the scorer needs from one execution.
#[derive(Debug, Clone)]
pub struct ExecResult {
    pub function: String,
    pub dialect: Dialect,
    pub ret_type: IrType,
    /// Source names of the parameters, indexed like `arg<i>`.
    pub param_names: Vec<String>,
    pub summaries: Vec<PathSummary>,
    /// Path cap or timeout stopped exploration early.
    pub incomplete: bool,
    /// Every region created on any path, by name.
    pub regions: BTreeMap<String, RegionInfo>,
    /// Value each reported output leaf held before execution.
    pub initial: BTreeMap<String, SymExpr>,
    /// Access path of every leaf of every region, by (region, offset).
    pub leaf_names: BTreeMap<(String, u64), String>,
}

impl ExecResult {
    pub fn count(&self, pred: impl Fn(&Terminal) -> bool) -> usize {
        self.summaries.iter().filter(|s| pred(&s.terminal)).count()
    }
}
