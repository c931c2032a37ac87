// SPDX-License-Identifier: Apache-2.0

//! Contracts of the translation pipeline, driven by scripted model clients.
//! No test here opens a network connection.

mod common;

use proptest::prelude::*;

use common::scripted::{
    assert_chunked_echo, assert_offline_misses, assert_retry_bounds, assert_shared_cache, Marker,
};
use s3diff::pipeline::{
    chunk_function, estimate_tokens, ingest_c, reassemble, transpile_with_feedback, JobStatus,
    Limits, ScriptedClient, StructCache,
};

#[test]
fn retry_bounds_hold_for_every_reply_pattern() {
    // sum over the nine limit pairs of all reply sequences up to the bound
    assert_eq!(assert_retry_bounds(), 756);
}

#[test]
fn shared_records_are_embedded_byte_identically() {
    assert_shared_cache();
}

#[test]
fn file_mock_misses_never_reach_the_network() {
    assert_offline_misses();
}

#[test]
fn deny_listed_calls_count_as_unsafe() {
    let f = ingest_c("int add1(int a) { return a + 1; }")
        .functions
        .remove(0);
    let client = ScriptedClient::with_responder(4096, |_| {
        Some("fn add1(a: i32) -> i32 { libc::abs(a) + 1 }".into())
    });
    let limits = Limits {
        unsafe_retries: 1,
        ..Limits::default()
    };
    let job = transpile_with_feedback(
        &f,
        &[],
        &StructCache::default(),
        &client,
        Some(&Marker),
        &limits,
    );
    assert_eq!(
        (job.status, job.attempts.len()),
        (JobStatus::CompiledUnsafe, 2)
    );
    assert!(job.attempts[1].prompts[0].contains("libc::abs"));
}

#[test]
fn chunked_translation_reassembles_the_source() {
    assert_chunked_echo();
}

fn c_function() -> impl Strategy<Value = String> {
    let stmt = prop_oneof![
        (1usize..12).prop_map(|n| format!("    x = x{};\n", " + 1".repeat(n))),
        (1usize..6)
            .prop_map(|n| format!("    if (x > {n}) {{ x = x - {n}; }} else {{ x = {n}; }}\n")),
        (1usize..4).prop_map(|n| format!("    while (x > {n}) {{ x = x / 2; }}\n")),
        Just("    /* a comment ; with { braces */\n".to_string()),
        Just("    s = \"text ; { }\";\n".to_string()),
    ];
    prop::collection::vec(stmt, 1..40)
        .prop_map(|body| format!("int f(int x) {{\n{}    return x;\n}}", body.concat()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chunks_concatenate_to_the_source(src in c_function(), budget in 40usize..400, ctx_words in 0usize..20) {
        let context = "word ".repeat(ctx_words);
        match chunk_function(&src, &context, budget) {
            Ok(chunks) => {
                let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
                prop_assert_eq!(&joined, &src);
                let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
                prop_assert_eq!(reassemble(&texts), src.clone());
                for (i, c) in chunks.iter().enumerate() {
                    prop_assert_eq!((c.part, c.parts), (i + 1, chunks.len()));
                    if chunks.len() > 1 {
                        prop_assert!(estimate_tokens(&c.text) + estimate_tokens(&context) <= budget);
                    }
                }
            }
            Err(e) => prop_assert!(e.to_string().contains("line"), "{e}"),
        }
    }
}
