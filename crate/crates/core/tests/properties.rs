// SPDX-License-Identifier: Apache-2.0

//! Property suites over generated functions, expressions and graphs.

mod common;

use proptest::prelude::*;

use common::gen::{self, FnShape};
use common::oracle::Tape;
use s3diff::s3::{ged, ged_with, score_function, GedConfig, ScoreConfig};
use s3diff::symexec::{execute, ConstraintKind, ExecConfig, SymExpr};
use s3diff::symgraph::{normalize_expr, parse_kquery, to_kquery, NormRules, SymGraph};

fn generated(seed: u64, shape: Option<FnShape>) -> (String, s3diff::mir::Module) {
    let mut rng = gen::rng(seed);
    let shape = shape.unwrap_or_else(|| FnShape::small(&mut rng));
    let text = gen::function_text(&mut rng, "f", shape);
    let m = common::module(&text);
    (text, m)
}

fn memory_shape(seed: u64) -> FnShape {
    FnShape {
        rust: seed % 2 == 0,
        width: 8,
        params: 2,
        memory: true,
        max_branches: 4,
    }
}

/// Values of `e` and `n` agree under every valuation of x and y.
fn same_values(e: &SymExpr, n: &SymExpr) -> Result<(), String> {
    let tape = Tape::new(&[e.clone(), n.clone()]);
    let k = tape.symbols.len();
    let mut scratch = Vec::new();
    let mut syms = vec![0u64; k];
    for v in 0..(1u64 << (8 * k)) {
        for (i, s) in syms.iter_mut().enumerate() {
            *s = (v >> (8 * i)) & 0xFF;
        }
        let r = tape.eval(&syms, &[], &mut scratch);
        if r[0] != r[1] {
            return Err(format!("valuation {syms:?}: {} vs {}", r[0], r[1]));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn execution_agrees_with_concrete_runs(seed in any::<u64>()) {
        let (text, m) = generated(seed, None);
        let r = execute(&m.functions[0], &m.records, &ExecConfig::default()).unwrap();
        if let Err(e) = common::check_soundness(&m.functions[0], &r) {
            prop_assert!(false, "{e}\n{text}");
        }
    }

    #[test]
    fn execution_is_deterministic(seed in any::<u64>()) {
        let (_, m) = generated(seed, Some(memory_shape(seed)));
        let cfg = ExecConfig::default();
        let a = execute(&m.functions[0], &m.records, &cfg).unwrap();
        let b = execute(&m.functions[0], &m.records, &cfg).unwrap();
        prop_assert_eq!(a.summaries, b.summaries);
    }

    #[test]
    fn branch_siblings_carry_negated_constraints(seed in any::<u64>()) {
        let (_, m) = generated(seed, None);
        let r = execute(&m.functions[0], &m.records, &ExecConfig::default()).unwrap();
        // two paths sharing a prefix diverge on an atom and its negation
        for a in &r.summaries {
            for b in &r.summaries {
                let common = a.constraints.iter().zip(&b.constraints).take_while(|(x, y)| x == y).count();
                if common < a.constraints.len() && common < b.constraints.len() {
                    let (x, y) = (&a.constraints[common], &b.constraints[common]);
                    prop_assert!(x.kind == ConstraintKind::Branch || matches!(x.kind, ConstraintKind::Check(_)));
                    prop_assert!(
                        SymExpr::not(x.expr.clone()) == y.expr || SymExpr::not(y.expr.clone()) == x.expr,
                        "{:?} / {:?}", x.expr, y.expr
                    );
                }
            }
        }
    }

    #[test]
    fn outputs_are_written_locations(seed in any::<u64>()) {
        let (text, m) = generated(seed, Some(memory_shape(seed)));
        let r = execute(&m.functions[0], &m.records, &ExecConfig::default()).unwrap();
        let stores = text.lines().filter(|l| l.trim_start().starts_with("store") && !l.contains(", acc")).count();
        for s in &r.summaries {
            prop_assert!(s.outputs.len() <= stores.min(3));
            for o in &s.outputs {
                prop_assert!(o.path.starts_with("arg"), "{}", o.path);
            }
        }
    }

    #[test]
    fn self_comparison_scores_zero(seed in any::<u64>()) {
        let shape = if seed % 3 == 0 { None } else { Some(memory_shape(seed)) };
        let (text, m) = generated(seed, shape);
        let (_, side) = common::run(&m, &m.functions[0], &ExecConfig::default());
        let rep = score_function(&side, &side, "f", &ScoreConfig::default());
        prop_assert!(rep.outputs.iter().all(|o| o.distance == 0), "{}\n{}", rep.to_table(), text);
    }

    #[test]
    fn kquery_round_trips_generated_summaries(seed in any::<u64>()) {
        let (_, m) = generated(seed, Some(memory_shape(seed)));
        let r = execute(&m.functions[0], &m.records, &ExecConfig::default()).unwrap();
        for s in &r.summaries {
            let text = to_kquery(s);
            let back = parse_kquery(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(&back, s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalization_preserves_values(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let w = [1, 8, 16, 32][(seed % 4) as usize];
        let e = gen::expr(&mut rng, w, 4, seed % 5 != 0);
        let n = normalize_expr(&e, &NormRules::default());
        if let Err(msg) = same_values(&e, &n) {
            prop_assert!(false, "{msg}\n{e:?}\n{n:?}");
        }
        prop_assert_eq!(normalize_expr(&n, &NormRules::default()), n);
    }

    #[test]
    fn exact_ged_matches_enumeration(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let (a, b) = (gen::graph(&mut rng, 5), gen::graph(&mut rng, 5));
        let r = ged_with(&a, &b, &GedConfig::default());
        prop_assert!(r.exact);
        prop_assert_eq!(r.distance, common::brute::ged(&a, &b));
        prop_assert_eq!(ged(&b, &a), r.distance);
        prop_assert_eq!(ged(&a, &a), 0);
    }

    #[test]
    fn dot_text_is_stable(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let e = gen::expr(&mut rng, 8, 4, true);
        let g = SymGraph::from_expr(&e);
        prop_assert_eq!(g.to_dot("f"), SymGraph::from_expr(&e).to_dot("f"));
    }
}
