// SPDX-License-Identifier: Apache-2.0

//! Expression graphs: text codec, normalization, output alignment and DOT.

mod align;
mod graph;
mod kquery;
mod normalize;

pub use align::{
    align_result, align_summaries, initial_read, output_union, AlignStep, AlignedPath, AlignedSide,
    AlignmentSpec, OutputSlot,
};
pub use graph::{node_label, Edge, SymGraph};
pub use kquery::{
    expr_to_kquery, parse_expr, parse_kquery, parse_kquery_file, to_kquery, KqueryError,
};
pub use normalize::{conjunction, normalize, normalize_constraints, normalize_expr, NormRules};
