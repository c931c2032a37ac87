// SPDX-License-Identifier: Apache-2.0

//! Model-driven C-to-Rust transpilation: ingest a C subset, pre-translate
//! records once, then translate each function with compiler and unsafe-code
//! feedback.

mod cache;
mod chunk;
mod context;
mod feedback;
mod ingest;
mod lex;
mod llm;
mod prompts;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{
    pretranslate_structs, sha256_hex, CacheEntry, PretranslateStats, StructCache, MANIFEST,
};
pub use chunk::{chunk_function, estimate_tokens, reassemble, Chunk, ChunkError};
pub use context::{
    analyze_field_usage, build_context, byte_sequence_fields, ContextFragment, FieldUse,
    FragmentKind,
};
pub use feedback::{
    scan_unsafe, transpile_with_feedback, Attempt, CommandAdapter, CompileOutcome, CompileResult,
    CompilerAdapter, JobStatus, Limits, TranspileJob, UnsafeFinding,
};
pub use ingest::{ingest_c, CFunction, SourceUnit};
#[cfg(feature = "http")]
pub use llm::HttpClient;
pub use llm::{
    extract_code, prompt_hash, FileMockClient, HttpSettings, LlmClient, LlmError, ScriptedClient,
};
pub use prompts::{RecordText, PROMPT_VERSION};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("struct cache: {0}")]
    Cache(String),
}

/// Counts over one transpilation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileSummary {
    pub functions: usize,
    pub compiled: usize,
    pub compiled_unsafe: usize,
    pub failed: usize,
    pub unchecked: usize,
    /// Share of compiled functions that still contain unsafe code, in percent.
    pub unsafe_percentage: f64,
    /// No compiler adapter was configured.
    pub dry_run: bool,
    pub structs: PretranslateStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranspileRun {
    pub jobs: Vec<TranspileJob>,
    pub cache: StructCache,
    pub summary: TranspileSummary,
}

pub fn summarize(
    jobs: &[TranspileJob],
    dry_run: bool,
    structs: PretranslateStats,
) -> TranspileSummary {
    let count = |s: JobStatus| jobs.iter().filter(|j| j.status == s).count();
    let compiled = jobs.iter().filter(|j| j.compiled()).count();
    let compiled_unsafe = count(JobStatus::CompiledUnsafe);
    TranspileSummary {
        functions: jobs.len(),
        compiled,
        compiled_unsafe,
        failed: count(JobStatus::Failed),
        unchecked: count(JobStatus::Unchecked),
        unsafe_percentage: if compiled == 0 {
            0.0
        } else {
            100.0 * compiled_unsafe as f64 / compiled as f64
        },
        dry_run,
        structs,
    }
}

/// Pre-translates every record, then runs one feedback job per function.
/// Jobs only read the finished cache, so they run in parallel; results keep
/// the unit's function order.
pub fn transpile_unit(
    unit: &SourceUnit,
    client: &dyn LlmClient,
    adapter: Option<&dyn CompilerAdapter>,
    cache: StructCache,
    limits: &Limits,
) -> TranspileRun {
    let (cache, structs) = pretranslate_structs(unit, client, cache, limits.struct_retries);
    let jobs: Vec<TranspileJob> = unit
        .functions
        .par_iter()
        .map(|f| {
            transpile_with_feedback(
                f,
                &build_context(unit, &f.name),
                &cache,
                client,
                adapter,
                limits,
            )
        })
        .collect();
    let summary = summarize(&jobs, adapter.is_none(), structs);
    TranspileRun {
        jobs,
        cache,
        summary,
    }
}
