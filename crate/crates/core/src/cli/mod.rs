// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `transpile`, `symtest`, `score` and `report`.
//!
//! Exit status: 0 when everything scored is equivalent (or the command has
//! nothing to judge), 1 when some output diverges or could not be shown
//! equivalent, 2 for configuration and usage errors, 3 for unreadable or
//! malformed inputs, 4 for output failures.

mod commands;
mod config;
mod rundir;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{
    run_score, run_symtest, run_transpile, FunctionEntry, FunctionStatus, SymtestSummary,
};
pub use config::{LlmConfig, RunConfig, DEFAULT_CONTEXT_BUDGET};
pub use rundir::{file_safe, RunDir, RunManifest, RUN_MANIFEST};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIVERGENT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("output: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "s3diff",
    version,
    about = "Differential symbolic testing of C-to-Rust transpilations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate the functions of a C file with a model and compiler feedback.
    Transpile(TranspileArgs),
    /// Execute name-matched c/rust mini-IR functions and score their outputs.
    Symtest(SymtestArgs),
    /// Score two KQuery files of path summaries against each other.
    Score(ScoreArgs),
    /// Print the reports of an earlier run.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory for all outputs.
    #[arg(long, default_value = "s3diff-run")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ExecArgs {
    #[arg(long)]
    pub depth_limit: Option<u32>,
    #[arg(long)]
    pub slice_length: Option<u64>,
    #[arg(long)]
    pub loop_unroll: Option<u32>,
    #[arg(long)]
    pub path_cap: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub feasibility_width: Option<u32>,
}

#[derive(Debug, Args, Default)]
pub struct ScoreFlags {
    /// Compare path by path instead of over merged outputs.
    #[arg(long)]
    pub per_path: bool,
    /// Turn off a normalization rule (ext-collapse, narrow, const-fold,
    /// commutative-order, drop-checks).
    #[arg(long = "disable-rule", value_name = "RULE")]
    pub disable_rules: Vec<String>,
    #[arg(long)]
    pub exact_max_nodes: Option<usize>,
    #[arg(long)]
    pub ged_budget: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SymtestArgs {
    /// c-dialect mini-IR file.
    #[arg(long = "c")]
    pub c: PathBuf,
    /// rust-dialect mini-IR file.
    #[arg(long = "rust")]
    pub rust: PathBuf,
    /// Write DOT graphs of every compared output.
    #[arg(long)]
    pub dot: bool,
    /// Exit 0 even when outputs diverge.
    #[arg(long)]
    pub report_only: bool,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[command(flatten)]
    pub score: ScoreFlags,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "c")]
    pub c: PathBuf,
    #[arg(long = "rust")]
    pub rust: PathBuf,
    /// Alignment steps for the rust side (JSON, or TOML otherwise).
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Function name used in the report; defaults to the c file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub dot: bool,
    #[arg(long)]
    pub report_only: bool,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub score: ScoreFlags,
}

#[derive(Debug, Args)]
pub struct TranspileArgs {
    /// C-subset source files, ingested as one unit.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub mock_dir: Option<PathBuf>,
    #[arg(long)]
    pub http_endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API token.
    #[arg(long)]
    pub token_env: Option<String>,
    #[arg(long)]
    pub context_budget: Option<usize>,
    /// Compiler command template, e.g. `rustc --crate-type lib {file}`.
    #[arg(long)]
    pub compiler: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub compile_retries: Option<usize>,
    #[arg(long)]
    pub unsafe_retries: Option<usize>,
    #[arg(long)]
    pub struct_retries: Option<usize>,
    /// Callee (or `path::` prefix) counted as unsafe; repeatable.
    #[arg(long = "deny")]
    pub deny: Vec<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory of an earlier symtest or score run.
    pub run: PathBuf,
    #[arg(long, value_parser = ["table", "json"], default_value = "table")]
    pub format: String,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.workers.is_some() {
        c.workers = common.workers;
    }
    Ok(c)
}

fn apply_exec(c: &mut RunConfig, a: &ExecArgs) {
    let e = &mut c.exec;
    if let Some(v) = a.depth_limit {
        e.depth_limit = v;
    }
    if let Some(v) = a.slice_length {
        e.slice_length = v;
    }
    if let Some(v) = a.loop_unroll {
        e.loop_unroll = v;
    }
    if let Some(v) = a.path_cap {
        e.path_cap = v;
    }
    if let Some(v) = a.timeout_secs {
        e.timeout_secs = v;
    }
    if let Some(v) = a.feasibility_width {
        e.feasibility_width = v;
    }
}

fn apply_score(c: &mut RunConfig, a: &ScoreFlags) -> Result<(), CliError> {
    let s = &mut c.score;
    s.per_path |= a.per_path;
    for r in &a.disable_rules {
        let flag = match r.as_str() {
            "ext-collapse" => &mut s.rules.ext_collapse,
            "narrow" => &mut s.rules.narrow,
            "const-fold" => &mut s.rules.const_fold,
            "commutative-order" => &mut s.rules.commutative_order,
            "drop-checks" => &mut s.rules.drop_checks,
            other => {
                return Err(CliError::Config(format!(
                    "unknown normalization rule '{other}'"
                )))
            }
        };
        *flag = false;
    }
    if let Some(v) = a.exact_max_nodes {
        s.ged.exact_max_nodes = v;
    }
    if let Some(v) = a.ged_budget {
        s.ged.budget = v;
    }
    Ok(())
}

fn apply_transpile(c: &mut RunConfig, a: &TranspileArgs) {
    if let Some(d) = &a.mock_dir {
        c.llm.mock_dir = Some(d.clone());
    }
    if a.http_endpoint.is_some() || a.model.is_some() || a.token_env.is_some() {
        let h = c.llm.http.get_or_insert_with(Default::default);
        if let Some(v) = &a.http_endpoint {
            h.endpoint = v.clone();
        }
        if let Some(v) = &a.model {
            h.model = v.clone();
        }
        if let Some(v) = &a.token_env {
            h.token_env = v.clone();
        }
    }
    if let Some(b) = a.context_budget {
        c.llm.context_budget = Some(b);
        if let Some(h) = c.llm.http.as_mut() {
            h.context_budget = b;
        }
    }
    if let Some(v) = &a.compiler {
        c.compiler = Some(v.clone());
    }
    if let Some(v) = &a.cache_dir {
        c.cache_dir = Some(v.clone());
    }
    if let Some(v) = a.compile_retries {
        c.limits.compile_retries = v;
    }
    if let Some(v) = a.unsafe_retries {
        c.limits.unsafe_retries = v;
    }
    if let Some(v) = a.struct_retries {
        c.limits.struct_retries = v;
    }
    c.limits.deny_list.extend(a.deny.iter().cloned());
}

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Symtest(a) => base_config(&a.common).and_then(|mut c| {
            apply_exec(&mut c, &a.exec);
            apply_score(&mut c, &a.score)?;
            c.validate()?;
            run_symtest(&a, &c)
        }),
        Command::Score(a) => base_config(&a.common).and_then(|mut c| {
            apply_score(&mut c, &a.score)?;
            c.validate()?;
            run_score(&a, &c)
        }),
        Command::Transpile(a) => base_config(&a.common).and_then(|mut c| {
            apply_transpile(&mut c, &a);
            c.validate()?;
            run_transpile(&a, &c)
        }),
        Command::Report(a) => commands::run_report(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("s3diff: {e}");
            e.exit_code()
        }
    }
}

/// Parses arguments (including the program name) and runs them.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
