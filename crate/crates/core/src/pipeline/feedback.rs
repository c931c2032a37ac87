// SPDX-License-Identifier: Apache-2.0

//! Compile-error and unsafe-code feedback loop around one function.

use std::process::Command;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::cache::StructCache;
use super::chunk::{chunk_function, reassemble};
use super::context::ContextFragment;
use super::ingest::CFunction;
use super::lex::{blank_rust, line_of};
use super::llm::{extract_code, LlmClient};
use super::prompts::{compile_fix_prompt, function_prompt, render_context, unsafe_fix_prompt};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub ok: bool,
    pub diagnostics: String,
}

/// Checks whether a candidate compiles.
pub trait CompilerAdapter: Send + Sync {
    /// `Err` when the check itself could not run.
    fn check(&self, source: &str) -> Result<CompileResult, String>;
}

/// Runs a shell command template; `{file}` is replaced by the path of a
/// temporary file holding the candidate. Exit status 0 means compiled and
/// the error stream carries diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandAdapter {
    pub template: String,
}

impl CommandAdapter {
    pub fn new(template: impl Into<String>) -> CommandAdapter {
        CommandAdapter {
            template: template.into(),
        }
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

impl CompilerAdapter for CommandAdapter {
    fn check(&self, source: &str) -> Result<CompileResult, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let file = dir.path().join("candidate.rs");
        std::fs::write(&file, source).map_err(|e| e.to_string())?;
        let cmd = self
            .template
            .replace("{file}", &shell_quote(&file.to_string_lossy()));
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .current_dir(dir.path())
            .output()
            .map_err(|e| format!("{cmd}: {e}"))?;
        Ok(CompileResult {
            ok: out.status.success(),
            diagnostics: String::from_utf8_lossy(&out.stderr).into_owned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsafeFinding {
    pub line: usize,
    pub what: String,
}

static CALL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:[A-Za-z_]\w*\s*::\s*)*[A-Za-z_]\w*\s*\(").expect("valid regex")
});
static UNSAFE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bunsafe\b").expect("valid regex"));

fn denied(path: &str, deny: &[String]) -> bool {
    let last = path.rsplit("::").next().unwrap_or(path);
    deny.iter().any(|d| {
        if d.ends_with("::") {
            path.starts_with(d.as_str())
        } else {
            path == d || last == d
        }
    })
}

/// Lexical scan outside comments and literals for the `unsafe` keyword and
/// calls whose path matches the deny-list. Entries ending in `::` match
/// path prefixes; others match a whole path or its last segment.
pub fn scan_unsafe(source: &str, deny: &[String]) -> Vec<UnsafeFinding> {
    let blank = blank_rust(source);
    let mut out: Vec<UnsafeFinding> = UNSAFE_RE
        .find_iter(&blank)
        .map(|m| UnsafeFinding {
            line: line_of(source, m.start()),
            what: "unsafe".into(),
        })
        .collect();
    for m in CALL_RE.find_iter(&blank) {
        let path: String = m
            .as_str()
            .trim_end_matches('(')
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        if denied(&path, deny) {
            out.push(UnsafeFinding {
                line: line_of(source, m.start()),
                what: format!("call to {path}"),
            });
        }
    }
    out.sort_by(|a, b| (a.line, &a.what).cmp(&(b.line, &b.what)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    /// Re-translations requested after compile errors.
    pub compile_retries: usize,
    /// Re-translations requested after unsafe findings, counted separately.
    pub unsafe_retries: usize,
    /// Extra attempts for a struct pre-translation that gets no usable answer.
    pub struct_retries: usize,
    pub deny_list: Vec<String>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            compile_retries: 3,
            unsafe_retries: 3,
            struct_retries: 2,
            deny_list: vec!["libc::".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobStatus {
    CompiledSafe,
    CompiledUnsafe,
    Failed,
    /// No compiler adapter: the candidate was recorded without checking.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CompileOutcome {
    NotChecked,
    Passed,
    Failed {
        diagnostics: String,
    },
    /// The model gave no response.
    NoResponse {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    /// Prompts sent; more than one when the function was chunked.
    pub prompts: Vec<String>,
    pub responses: Vec<String>,
    pub candidate: String,
    pub compile: CompileOutcome,
    pub unsafe_findings: Vec<UnsafeFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranspileJob {
    pub function: String,
    pub context: Vec<ContextFragment>,
    pub attempts: Vec<Attempt>,
    pub status: JobStatus,
    pub final_text: Option<String>,
    /// Context contains a record whose pre-translation failed.
    pub untranslated_records: Vec<String>,
    pub error: Option<String>,
}

impl TranspileJob {
    pub fn compiled(&self) -> bool {
        matches!(
            self.status,
            JobStatus::CompiledSafe | JobStatus::CompiledUnsafe
        )
    }
}

/// Sends prompts in order; the first failure aborts.
fn ask(client: &dyn LlmClient, prompts: Vec<String>) -> (Attempt, Result<String, String>) {
    let mut responses = Vec::new();
    for p in &prompts {
        match client.complete(p) {
            Ok(r) => responses.push(r),
            Err(e) => {
                let a = Attempt {
                    prompts,
                    responses,
                    candidate: String::new(),
                    compile: CompileOutcome::NoResponse {
                        error: e.to_string(),
                    },
                    unsafe_findings: Vec::new(),
                };
                return (a, Err(e.to_string()));
            }
        }
    }
    let candidate = if responses.len() == 1 {
        extract_code(&responses[0]).to_string()
    } else {
        reassemble(&responses)
    };
    let a = Attempt {
        prompts,
        responses,
        candidate: candidate.clone(),
        compile: CompileOutcome::NotChecked,
        unsafe_findings: Vec::new(),
    };
    (a, Ok(candidate))
}

/// Requests a translation, then feeds compiler diagnostics and unsafe
/// findings back until the candidate compiles without findings or a retry
/// budget runs out. Every exchange is kept in `attempts`, so
/// `attempts.len() <= compile_retries + unsafe_retries + 1`.
pub fn transpile_with_feedback(
    f: &CFunction,
    context: &[ContextFragment],
    cache: &StructCache,
    client: &dyn LlmClient,
    adapter: Option<&dyn CompilerAdapter>,
    limits: &Limits,
) -> TranspileJob {
    let record = |n: &str| cache.record_text(n);
    let untranslated_records = context
        .iter()
        .filter(|c| cache.get(&c.name).is_some_and(|e| !e.translated))
        .map(|c| c.name.clone())
        .collect();
    let mut job = TranspileJob {
        function: f.name.clone(),
        context: context.to_vec(),
        attempts: Vec::new(),
        status: JobStatus::Failed,
        final_text: None,
        untranslated_records,
        error: None,
    };
    let ctx_text = render_context(context, &record);
    let chunks = match chunk_function(&f.source, &ctx_text, client.context_budget()) {
        Ok(c) => c,
        Err(e) => {
            job.error = Some(e.to_string());
            return job;
        }
    };
    let mut prompts: Vec<String> = chunks
        .iter()
        .map(|c| {
            let part = (c.parts > 1).then_some((c.part, c.parts));
            function_prompt(&f.name, context, &record, &c.text, part)
        })
        .collect();
    let (mut compile_left, mut unsafe_left) = (limits.compile_retries, limits.unsafe_retries);
    loop {
        let (mut attempt, got) = ask(client, std::mem::take(&mut prompts));
        let candidate = match got {
            Ok(c) => c,
            Err(e) => {
                job.attempts.push(attempt);
                job.error = Some(e);
                job.status = JobStatus::Failed;
                return job;
            }
        };
        let Some(adapter) = adapter else {
            attempt.unsafe_findings = scan_unsafe(&candidate, &limits.deny_list);
            job.attempts.push(attempt);
            job.status = JobStatus::Unchecked;
            job.final_text = Some(candidate);
            return job;
        };
        let result = match adapter.check(&candidate) {
            Ok(r) => r,
            Err(e) => {
                job.attempts.push(attempt);
                job.error = Some(format!("compiler adapter: {e}"));
                job.status = JobStatus::Failed;
                return job;
            }
        };
        if !result.ok {
            attempt.compile = CompileOutcome::Failed {
                diagnostics: result.diagnostics.clone(),
            };
            job.attempts.push(attempt);
            if compile_left == 0 {
                job.status = JobStatus::Failed;
                job.error = Some("compile retries exhausted".into());
                return job;
            }
            compile_left -= 1;
            prompts = vec![compile_fix_prompt(
                &f.name,
                &f.source,
                &candidate,
                &result.diagnostics,
            )];
            continue;
        }
        attempt.compile = CompileOutcome::Passed;
        let findings = scan_unsafe(&candidate, &limits.deny_list);
        attempt.unsafe_findings = findings.clone();
        job.attempts.push(attempt);
        if findings.is_empty() {
            job.status = JobStatus::CompiledSafe;
            job.final_text = Some(candidate);
            return job;
        }
        if unsafe_left == 0 {
            job.status = JobStatus::CompiledUnsafe;
            job.final_text = Some(candidate);
            return job;
        }
        unsafe_left -= 1;
        prompts = vec![unsafe_fix_prompt(&f.name, &f.source, &candidate, &findings)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{ingest_c, ScriptedClient};

    struct Fake(fn(&str) -> bool);

    impl CompilerAdapter for Fake {
        fn check(&self, source: &str) -> Result<CompileResult, String> {
            let ok = (self.0)(source);
            Ok(CompileResult {
                ok,
                diagnostics: if ok {
                    String::new()
                } else {
                    "error[E0425]: cannot find value".into()
                },
            })
        }
    }

    fn func() -> CFunction {
        ingest_c("int add1(int a) { return a + 1; }")
            .functions
            .remove(0)
    }

    #[test]
    fn fail_then_pass_compiles_safely_on_second_attempt() {
        let c = ScriptedClient::with_queue(
            1000,
            [
                "```rust\nfn add1(a: i32) -> i32 { b }\n```",
                "```rust\nfn add1(a: i32) -> i32 { a + 1 }\n```",
            ],
        );
        let job = transpile_with_feedback(
            &func(),
            &[],
            &StructCache::default(),
            &c,
            Some(&Fake(|s| !s.contains("{ b }"))),
            &Limits::default(),
        );
        assert_eq!(job.status, JobStatus::CompiledSafe);
        assert_eq!(job.attempts.len(), 2);
        assert!(job.attempts[1].prompts[0].contains("error[E0425]"));
        assert_eq!(
            job.final_text.as_deref(),
            Some("fn add1(a: i32) -> i32 { a + 1 }\n")
        );
    }

    #[test]
    fn persistent_unsafe_stops_at_the_bound() {
        let c = ScriptedClient::with_responder(1000, |_| {
            Some("fn add1(a: i32) -> i32 { unsafe { a + 1 } }".into())
        });
        let limits = Limits {
            unsafe_retries: 3,
            ..Limits::default()
        };
        let job = transpile_with_feedback(
            &func(),
            &[],
            &StructCache::default(),
            &c,
            Some(&Fake(|_| true)),
            &limits,
        );
        assert_eq!(job.status, JobStatus::CompiledUnsafe);
        assert_eq!(job.attempts.len(), 4);
    }

    #[test]
    fn missing_adapter_is_a_dry_run() {
        let c = ScriptedClient::with_queue(1000, ["fn add1(a: i32) -> i32 { a + 1 }"]);
        let job = transpile_with_feedback(
            &func(),
            &[],
            &StructCache::default(),
            &c,
            None,
            &Limits::default(),
        );
        assert_eq!(job.status, JobStatus::Unchecked);
        assert_eq!(job.attempts.len(), 1);
        assert_eq!(job.attempts[0].compile, CompileOutcome::NotChecked);
    }

    #[test]
    fn scanner_ignores_comments_and_strings() {
        let deny = Limits::default().deny_list;
        let src = "// unsafe here\nfn f() {\n let s = \"unsafe\";\n let p = libc::malloc(4);\n let q = std::ptr::null::<u8>();\n}\nunsafe fn g() {}\n";
        let found = scan_unsafe(src, &deny);
        assert_eq!(
            found,
            vec![
                UnsafeFinding {
                    line: 4,
                    what: "call to libc::malloc".into()
                },
                UnsafeFinding {
                    line: 7,
                    what: "unsafe".into()
                },
            ]
        );
        assert!(scan_unsafe(src, &["malloc".to_string()])
            .iter()
            .any(|f| f.what == "call to libc::malloc"));
    }

    #[test]
    fn command_adapter_reports_exit_status_and_stderr() {
        let ok = CommandAdapter::new("grep -q 'fn' {file}")
            .check("fn f() {}")
            .unwrap();
        assert!(ok.ok);
        let bad = CommandAdapter::new("echo nope >&2; exit 3")
            .check("fn f() {}")
            .unwrap();
        assert!(!bad.ok);
        assert_eq!(bad.diagnostics, "nope\n");
    }
}
