// SPDX-License-Identifier: Apache-2.0

//! Regressions for three known transpilation bugs, hand-encoded as c/rust
//! mini-IR pairs.

mod common;

use std::time::{Duration, Instant};

use s3diff::s3::{ReturnOffset, Verdict};
use s3diff::symexec::ExecConfig;

#[test]
fn scan_option_returns_one_byte_short() {
    let t = Instant::now();
    let rep = common::score_fixture("scan_option", "scan_option", &ExecConfig::default());
    let elapsed = t.elapsed();
    let out = &rep.outputs[0];
    assert_eq!(out.output, "ret");
    assert_eq!(out.verdict, Verdict::Divergent);
    // the bound is proven even when the search stops early
    assert!(
        out.lower_bound >= 1 && out.distance >= out.lower_bound,
        "{out:?}"
    );
    let offsets = out
        .min_return_offset
        .as_ref()
        .expect("pointer-shaped returns");
    assert_eq!(
        offsets.c,
        Some(ReturnOffset {
            base: "s".into(),
            offset: 3
        })
    );
    assert_eq!(
        offsets.rust,
        Some(ReturnOffset {
            base: "s".into(),
            offset: 2
        })
    );
    assert!(
        out.diagnostics
            .iter()
            .any(|d| d == "minimum return offset: c s + 3, rust s + 2"),
        "{:?}",
        out.diagnostics
    );
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
}

#[test]
fn scan_option_is_exact_at_a_small_unroll() {
    let cfg = ExecConfig {
        loop_unroll: 2,
        ..ExecConfig::default()
    };
    let rep = common::score_fixture("scan_option", "scan_option", &cfg);
    let out = &rep.outputs[0];
    assert!(!out.approximate, "{out:?}");
    assert!(out.distance >= 1);
    let offsets = out
        .min_return_offset
        .as_ref()
        .expect("pointer-shaped returns");
    assert_eq!(offsets.c.as_ref().map(|o| o.offset), Some(3));
    assert_eq!(offsets.rust.as_ref().map(|o| o.offset), Some(2));
}

#[test]
fn csv_set_blk_size_guards_on_the_old_value() {
    let t = Instant::now();
    let rep = common::score_fixture(
        "csv_set_blk_size",
        "csv_set_blk_size",
        &ExecConfig::default(),
    );
    let elapsed = t.elapsed();
    let out = rep
        .outputs
        .iter()
        .find(|o| o.output == "arg0.blk_size")
        .expect("blk_size output");
    assert_eq!(out.verdict, Verdict::Divergent);
    assert!(out.distance >= 1);
    assert!(
        out.diagnostics
            .iter()
            .any(|d| d.contains("p.blk_size != 0")),
        "{:?}",
        out.diagnostics
    );
    assert!(
        out.diagnostics
            .iter()
            .any(|d| d == "guard only in rust: p.blk_size != 0"),
        "{:?}",
        out.diagnostics
    );
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
}

#[test]
fn u8next_keeps_the_masked_lead_byte() {
    let t = Instant::now();
    let rep = common::score_fixture("u8next", "u8next_", &ExecConfig::default());
    let elapsed = t.elapsed();
    let ret = rep.outputs.iter().find(|o| o.output == "ret").expect("ret");
    assert_eq!(ret.verdict, Verdict::Equivalent);
    let ch = rep
        .outputs
        .iter()
        .find(|o| o.output == "arg1[0]")
        .expect("ch output");
    assert_eq!(ch.verdict, Verdict::Divergent);
    let binding = ch
        .diagnostics
        .iter()
        .find(|d| d.starts_with("when "))
        .expect("binding diagnostic");
    assert!(
        binding.contains("c binds arg1[0] = zext32(txt[0])"),
        "{binding}"
    );
    assert!(
        binding.contains("rust binds arg1[0] = 31 & zext32(txt[0])"),
        "{binding}"
    );
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
}

#[test]
fn u8next_binds_0xc2_against_0x02_on_an_invalid_continuation() {
    use s3diff::symexec::{eval_concrete, execute, Terminal, Valuation, VarKey};

    // concrete witness: lead byte 0xC2 followed by a non-continuation byte
    let mut val = Valuation::new();
    val.set(VarKey::Byte("arg0".into(), 0), 0xC2)
        .set(VarKey::Byte("arg0".into(), 1), 0x41);
    let mut seen = Vec::new();
    for dialect in ["c", "rust"] {
        let m = common::module(&common::fixture(&format!("u8next.{dialect}.mir")));
        let r = execute(&m.functions[0], &m.records, &ExecConfig::default()).unwrap();
        let hit: Vec<_> = r
            .summaries
            .iter()
            .filter(|s| s.terminal == Terminal::Return)
            .filter(|s| {
                s.constraints
                    .iter()
                    .all(|c| eval_concrete(&c.expr, &val).unwrap() == 1)
            })
            .collect();
        assert_eq!(hit.len(), 1);
        let ch = hit[0].output("arg1[0]").expect("ch written");
        seen.push(eval_concrete(&ch.value, &val).unwrap());
        assert_eq!(
            eval_concrete(hit[0].ret.as_ref().unwrap(), &val).unwrap(),
            0xFFFF_FFFF
        );
    }
    assert_eq!(seen, vec![0xC2, 0x02]);
}
