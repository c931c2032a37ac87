// SPDX-License-Identifier: Apache-2.0

//! Semantic distance between the C and Rust versions of a function: merged
//! per-output expression graphs compared by graph edit distance.

mod ged;
mod merge;
mod render;
mod score;

pub use ged::{first_difference, ged, ged_with, GedConfig, GedResult};
pub use merge::{guarded_values, merge_paths, GuardedValue};
pub use render::{infix, Names};
pub use score::{
    compared_outputs, score_function, OutputReport, ReturnOffset, S3Report, ScoreConfig, SidePair,
    Verdict, REPORT_VERSION,
};
