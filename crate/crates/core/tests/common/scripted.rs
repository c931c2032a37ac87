// SPDX-License-Identifier: Apache-2.0

//! Scripted model replies and a marker compiler for pipeline tests.

use s3diff::pipeline::{
    estimate_tokens, ingest_c, transpile_unit, transpile_with_feedback, CompileOutcome,
    CompileResult, CompilerAdapter, FileMockClient, JobStatus, Limits, LlmClient, ScriptedClient,
    StructCache,
};

/// What one scripted response turns out to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    Broken,
    Unsafe,
    Safe,
}

impl Reply {
    pub fn text(self) -> &'static str {
        match self {
            Reply::Broken => "```rust\nfn add1(a: i32) -> i32 { BROKEN }\n```",
            Reply::Unsafe => "```rust\nfn add1(a: i32) -> i32 { unsafe { a + 1 } }\n```",
            Reply::Safe => "```rust\nfn add1(a: i32) -> i32 { a + 1 }\n```",
        }
    }
}

pub struct Marker;

impl CompilerAdapter for Marker {
    fn check(&self, source: &str) -> Result<CompileResult, String> {
        let ok = !source.contains("BROKEN");
        Ok(CompileResult {
            ok,
            diagnostics: if ok {
                String::new()
            } else {
                "error: cannot find value `BROKEN`".into()
            },
        })
    }
}

/// Independent model of the feedback loop: expected attempt count and
/// final status for a reply sequence. Running out of replies is a
/// missing response.
pub fn expected(replies: &[Reply], compile: usize, unsafe_: usize) -> (usize, JobStatus) {
    let (mut c, mut u) = (compile, unsafe_);
    for (i, r) in replies.iter().enumerate() {
        match r {
            Reply::Broken if c == 0 => return (i + 1, JobStatus::Failed),
            Reply::Broken => c -= 1,
            Reply::Unsafe if u == 0 => return (i + 1, JobStatus::CompiledUnsafe),
            Reply::Unsafe => u -= 1,
            Reply::Safe => return (i + 1, JobStatus::CompiledSafe),
        }
    }
    (replies.len() + 1, JobStatus::Failed)
}

pub fn sequences(max_len: usize) -> Vec<Vec<Reply>> {
    let mut all = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for r in [Reply::Broken, Reply::Unsafe, Reply::Safe] {
                let mut t: Vec<Reply> = s.clone();
                t.push(r);
                next.push(t);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

pub const SHARED: &str = "struct point { int x; int y; };\n\
int norm1(struct point *p) { return p->x + p->y; }\n\
int dot(struct point *a, struct point *b) { return a->x * b->x + a->y * b->y; }\n";

pub fn shared_responder(p: &str) -> Option<String> {
    if p.contains(": struct]") {
        Some("```rust\n#[derive(Debug, Clone)]\npub struct Point {\n    pub x: i32,\n    pub y: i32,\n}\n```".into())
    } else {
        Some("```rust\nfn placeholder() {}\n```".into())
    }
}

/// Text following the pre-generated-definition marker for `record`.
pub fn embedded(prompt: &str, record: &str) -> String {
    let marker = format!("// use this pre-generated definition for `{record}`:\n");
    let start = prompt.find(&marker).expect("marker") + marker.len();
    let rest = &prompt[start..];
    rest[..rest.find("\n```").expect("context fence")].to_string()
}

/// Runs every reply sequence up to the retry bound under each limit pair
/// in 0..=2 and returns the number of runs.
pub fn assert_retry_bounds() -> usize {
    let f = ingest_c("int add1(int a) { return a + 1; }")
        .functions
        .remove(0);
    let mut runs = 0;
    for compile in 0..=2 {
        for unsafe_ in 0..=2 {
            let limits = Limits {
                compile_retries: compile,
                unsafe_retries: unsafe_,
                ..Limits::default()
            };
            let bound = compile + unsafe_ + 1;
            for seq in sequences(bound) {
                let client = ScriptedClient::with_queue(4096, seq.iter().map(|r| r.text()));
                let job = transpile_with_feedback(
                    &f,
                    &[],
                    &StructCache::default(),
                    &client,
                    Some(&Marker),
                    &limits,
                );
                let (n, status) = expected(&seq, compile, unsafe_);
                assert!(job.attempts.len() <= bound, "{seq:?}");
                assert_eq!(
                    (job.attempts.len(), job.status),
                    (n.min(bound), status),
                    "{seq:?} c={compile} u={unsafe_}"
                );
                assert_eq!(client.calls(), job.attempts.len());
                let failed_compiles = job
                    .attempts
                    .iter()
                    .filter(|a| matches!(a.compile, CompileOutcome::Failed { .. }))
                    .count();
                assert!(failed_compiles <= compile + 1);
                let unsafe_passes = job
                    .attempts
                    .iter()
                    .filter(|a| {
                        a.compile == CompileOutcome::Passed && !a.unsafe_findings.is_empty()
                    })
                    .count();
                assert!(unsafe_passes <= unsafe_ + 1);
                runs += 1;
            }
        }
    }
    runs
}

/// Two functions sharing a record see its cached text byte for byte.
pub fn assert_shared_cache() {
    let unit = ingest_c(SHARED);
    let client = ScriptedClient::with_responder(4096, shared_responder);
    let run = transpile_unit(
        &unit,
        &client,
        None,
        StructCache::default(),
        &Limits::default(),
    );
    assert_eq!(run.summary.structs.llm_calls, 1);
    let cached = run
        .cache
        .get("point")
        .expect("cached")
        .text
        .trim_end()
        .to_string();
    let texts: Vec<String> = run
        .jobs
        .iter()
        .map(|j| embedded(&j.attempts[0].prompts[0], "point"))
        .collect();
    assert_eq!(texts.len(), 2);
    assert!(texts.iter().all(|t| *t == cached), "{texts:?}");

    // a persisted cache answers the rerun without another struct call
    let dir = tempfile::tempdir().unwrap();
    run.cache.save(dir.path()).unwrap();
    let again = ScriptedClient::with_responder(4096, shared_responder);
    let rerun = transpile_unit(
        &unit,
        &again,
        None,
        StructCache::load(dir.path()).unwrap(),
        &Limits::default(),
    );
    assert_eq!(rerun.summary.structs.llm_calls, 0);
    for (a, b) in run.jobs.iter().zip(&rerun.jobs) {
        assert_eq!(a.attempts[0].prompts, b.attempts[0].prompts);
    }
}

/// An empty mock directory yields missing responses, never a request.
pub fn assert_offline_misses() {
    let dir = tempfile::tempdir().unwrap();
    let client = FileMockClient::new(dir.path(), 4096);
    let unit = ingest_c("int add1(int a) { return a + 1; }");
    let run = transpile_unit(
        &unit,
        &client,
        None,
        StructCache::default(),
        &Limits::default(),
    );
    assert_eq!(run.jobs[0].status, JobStatus::Failed);
    assert!(matches!(
        run.jobs[0].attempts[0].compile,
        CompileOutcome::NoResponse { .. }
    ));
    let logged = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "prompt")
        })
        .count();
    assert_eq!(logged, 1);
}

/// Echoes the C chunk of a function prompt back as the "translation".
fn echo(p: &str) -> Option<String> {
    let start = p.find("C source:\n```c\n")? + "C source:\n```c\n".len();
    let rest = &p[start..];
    Some(rest[..rest.rfind("\n```\n")?].to_string())
}

/// A function over the model budget is split, and echoed chunks
/// reassemble to its exact source.
pub fn assert_chunked_echo() {
    let mut src = String::from("int long_one(int a) {\n");
    for i in 0..60 {
        src.push_str(&format!(
            "    if (a > {i}) {{ a = a - {i}; }} else {{ a = a + {i}; }}\n"
        ));
    }
    src.push_str("    return a;\n}");
    let f = ingest_c(&src).functions.remove(0);
    let client = ScriptedClient::with_responder(200, echo);
    let job = transpile_with_feedback(
        &f,
        &[],
        &StructCache::default(),
        &client,
        None,
        &Limits::default(),
    );
    assert!(
        job.attempts[0].prompts.len() > 1,
        "the function should be split"
    );
    assert!(job.attempts[0]
        .prompts
        .iter()
        .all(|p| p.contains("/* part ")));
    assert_eq!(job.final_text.as_deref(), Some(f.source.as_str()));
    assert!(client.context_budget() < estimate_tokens(&f.source));
}
