// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rundir::{file_safe, RunDir};
use super::{
    CliError, ReportArgs, RunConfig, ScoreArgs, SymtestArgs, TranspileArgs, EXIT_DIVERGENT, EXIT_OK,
};
use crate::mir::{parse_ir, Module};
use crate::pipeline::{
    ingest_c, transpile_unit, CommandAdapter, CompilerAdapter, FileMockClient, LlmClient,
    StructCache, TranspileRun,
};
use crate::s3::{score_function, S3Report};
use crate::symexec::{execute, ExecResult};
use crate::symgraph::{
    align_result, align_summaries, parse_kquery_file, to_kquery, AlignedSide, AlignmentSpec,
    SymGraph,
};

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers())
        .build()
        .map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionStatus {
    Scored,
    /// Only the rust file defines the function.
    MissingC,
    /// Only the c file defines the function.
    MissingRust,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionEntry {
    pub function: String,
    pub status: FunctionStatus,
    pub outputs_total: usize,
    pub outputs_equivalent: usize,
    pub distance: u32,
    pub approximate: bool,
    pub incomplete: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymtestSummary {
    pub version: u32,
    pub functions: Vec<FunctionEntry>,
    pub outputs_total: usize,
    pub outputs_equivalent: usize,
    /// Share of outputs with distance 0, in percent.
    pub equivalent_percentage: f64,
    /// Every output of every function has exact distance 0 and no side was
    /// cut short.
    pub all_equivalent: bool,
}

impl SymtestSummary {
    fn new(functions: Vec<FunctionEntry>) -> SymtestSummary {
        let outputs_total = functions.iter().map(|f| f.outputs_total).sum();
        let outputs_equivalent = functions.iter().map(|f| f.outputs_equivalent).sum();
        let all_equivalent = functions.iter().all(|f| {
            f.status == FunctionStatus::Scored
                && f.outputs_equivalent == f.outputs_total
                && !f.approximate
                && !f.incomplete
        });
        SymtestSummary {
            version: crate::s3::REPORT_VERSION,
            functions,
            outputs_total,
            outputs_equivalent,
            equivalent_percentage: if outputs_total == 0 {
                100.0
            } else {
                100.0 * outputs_equivalent as f64 / outputs_total as f64
            },
            all_equivalent,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<24} {:<13} {:>9} {:>8}\n",
            "function", "status", "eq/total", "distance"
        );
        for f in &self.functions {
            let status = match f.status {
                FunctionStatus::Scored if f.incomplete => "incomplete",
                FunctionStatus::Scored => "scored",
                FunctionStatus::MissingC => "missing-c",
                FunctionStatus::MissingRust => "missing-rust",
                FunctionStatus::Error => "error",
            };
            let mark = if f.approximate { "~" } else { "" };
            let _ = writeln!(
                s,
                "{:<24} {:<13} {:>9} {:>8}",
                f.function,
                status,
                format!("{}/{}", f.outputs_equivalent, f.outputs_total),
                format!("{mark}{}", f.distance)
            );
            if let Some(e) = &f.error {
                let _ = writeln!(s, "  error: {e}");
            }
        }
        let _ = writeln!(
            s,
            "equivalent outputs: {}/{} ({:.1}%)",
            self.outputs_equivalent, self.outputs_total, self.equivalent_percentage
        );
        s
    }
}

fn entry(report: &S3Report, status: FunctionStatus) -> FunctionEntry {
    FunctionEntry {
        function: report.function.clone(),
        status,
        outputs_total: report.outputs_total,
        outputs_equivalent: if status == FunctionStatus::Scored {
            report.outputs_equivalent
        } else {
            0
        },
        distance: report.distance,
        approximate: report.approximate,
        incomplete: report.incomplete.c || report.incomplete.rust,
        error: None,
    }
}

fn error_entry(function: &str, msg: String) -> FunctionEntry {
    FunctionEntry {
        function: function.to_string(),
        status: FunctionStatus::Error,
        outputs_total: 0,
        outputs_equivalent: 0,
        distance: 0,
        approximate: false,
        incomplete: false,
        error: Some(msg),
    }
}

struct Scored {
    entry: FunctionEntry,
    report: Option<S3Report>,
    kquery: Vec<(&'static str, String)>,
}

fn side_of(m: &Module, name: &str, cfg: &RunConfig) -> Result<(ExecResult, AlignedSide), String> {
    let f = m.function(name).expect("name comes from this module");
    let r = execute(f, &m.records, &cfg.exec).map_err(|e| e.to_string())?;
    let side = align_result(&r, &AlignmentSpec::for_function(f, &m.records));
    Ok((r, side))
}

fn kquery_text(r: &ExecResult) -> String {
    r.summaries
        .iter()
        .map(to_kquery)
        .collect::<Vec<_>>()
        .join("\n")
}

fn symtest_one(name: &str, c: &Module, r: &Module, cfg: &RunConfig) -> Scored {
    let (in_c, in_r) = (c.function(name).is_some(), r.function(name).is_some());
    let sides = (
        in_c.then(|| side_of(c, name, cfg)),
        in_r.then(|| side_of(r, name, cfg)),
    );
    let (cs, rs) = match sides {
        (Some(Err(e)), _) => {
            return Scored {
                entry: error_entry(name, format!("c: {e}")),
                report: None,
                kquery: Vec::new(),
            }
        }
        (_, Some(Err(e))) => {
            return Scored {
                entry: error_entry(name, format!("rust: {e}")),
                report: None,
                kquery: Vec::new(),
            }
        }
        (a, b) => (
            a.map(|x| x.expect("checked")),
            b.map(|x| x.expect("checked")),
        ),
    };
    let mut kquery = Vec::new();
    if let Some((res, _)) = &cs {
        kquery.push(("c", kquery_text(res)));
    }
    if let Some((res, _)) = &rs {
        kquery.push(("rust", kquery_text(res)));
    }
    let status = match (&cs, &rs) {
        (Some(_), Some(_)) => FunctionStatus::Scored,
        (Some(_), None) => FunctionStatus::MissingRust,
        _ => FunctionStatus::MissingC,
    };
    let empty = AlignedSide::default();
    let c_side = cs.as_ref().map_or(&empty, |x| &x.1);
    let r_side = rs.as_ref().map_or(&empty, |x| &x.1);
    let report = score_function(c_side, r_side, name, &cfg.score);
    Scored {
        entry: entry(&report, status),
        report: Some(report),
        kquery,
    }
}

fn write_dot(run: &mut RunDir, report: &S3Report) -> Result<(), CliError> {
    for o in &report.outputs {
        for (dialect, e) in [("c", &o.c_expr), ("rust", &o.rust_expr)] {
            let Some(e) = e else { continue };
            let title = format!("{}.{}.{dialect}", report.function, o.output);
            let dot = SymGraph::from_expr(e).to_dot(&title);
            run.write(&format!("dot/{}.dot", file_safe(&title)), &dot)?;
        }
    }
    Ok(())
}

fn write_report(run: &mut RunDir, report: &S3Report, dot: bool) -> Result<(), CliError> {
    run.write_json(
        &format!("reports/{}.json", file_safe(&report.function)),
        report,
    )?;
    if dot {
        write_dot(run, report)?;
    }
    Ok(())
}

fn parse_module(path: &Path, text: &str) -> Result<Module, CliError> {
    parse_ir(text).map_err(|e| CliError::Input(format!("{}:{e}", path.display())))
}

pub fn run_symtest(a: &SymtestArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let (ct, rt) = (read(&a.c)?, read(&a.rust)?);
    let (cm, rm) = (parse_module(&a.c, &ct)?, parse_module(&a.rust, &rt)?);
    let names: BTreeSet<&str> = cm
        .functions
        .iter()
        .chain(&rm.functions)
        .map(|f| f.name.as_str())
        .collect();
    let names: Vec<&str> = names.into_iter().collect();
    let results: Vec<Scored> = pool(cfg)?.install(|| {
        names
            .par_iter()
            .map(|n| symtest_one(n, &cm, &rm, cfg))
            .collect()
    });
    let mut run = RunDir::create(&a.common.out)?;
    let mut entries = Vec::new();
    let mut table = String::new();
    for s in results {
        if let Some(r) = &s.report {
            write_report(&mut run, r, a.dot)?;
            table.push_str(&r.to_table());
        }
        for (dialect, text) in &s.kquery {
            run.write(
                &format!("kquery/{}.{dialect}.kq", file_safe(&s.entry.function)),
                text,
            )?;
        }
        entries.push(s.entry);
    }
    let summary = SymtestSummary::new(entries);
    table.push('\n');
    table.push_str(&summary.to_table());
    run.write_json("summary.json", &summary)?;
    run.write("summary.txt", &table)?;
    run.finish("symtest", &[(&a.c, &ct), (&a.rust, &rt)], cfg)?;
    print!("{table}");
    Ok(if summary.all_equivalent || a.report_only {
        EXIT_OK
    } else {
        EXIT_DIVERGENT
    })
}

fn load_align(path: &Path) -> Result<AlignmentSpec, CliError> {
    let text = read(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn kquery_side(path: &Path, text: &str, spec: &AlignmentSpec) -> Result<AlignedSide, CliError> {
    let summaries = parse_kquery_file(text).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: {}",
            path.display(),
            e.line,
            e.col,
            e.msg
        ))
    })?;
    Ok(align_summaries(&summaries, spec, &BTreeMap::new()))
}

pub fn run_score(a: &ScoreArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let (ct, rt) = (read(&a.c)?, read(&a.rust)?);
    let spec = match &a.align {
        Some(p) => load_align(p)?,
        None => AlignmentSpec::default(),
    };
    let c = kquery_side(&a.c, &ct, &AlignmentSpec::default())?;
    let r = kquery_side(&a.rust, &rt, &spec)?;
    let name = a.name.clone().unwrap_or_else(|| {
        a.c.file_stem().map_or_else(
            || "function".to_string(),
            |s| s.to_string_lossy().into_owned(),
        )
    });
    let report = pool(cfg)?.install(|| score_function(&c, &r, &name, &cfg.score));
    let mut run = RunDir::create(&a.common.out)?;
    write_report(&mut run, &report, a.dot)?;
    let summary = SymtestSummary::new(vec![entry(&report, FunctionStatus::Scored)]);
    let mut table = report.to_table();
    table.push('\n');
    table.push_str(&summary.to_table());
    run.write_json("summary.json", &summary)?;
    run.write("summary.txt", &table)?;
    let mut inputs: Vec<(&Path, &str)> = vec![(&a.c, &ct), (&a.rust, &rt)];
    let align_text = a.align.as_ref().map(|p| read(p)).transpose()?;
    if let (Some(p), Some(t)) = (&a.align, &align_text) {
        inputs.push((p, t));
    }
    run.finish("score", &inputs, cfg)?;
    print!("{table}");
    Ok(if summary.all_equivalent || a.report_only {
        EXIT_OK
    } else {
        EXIT_DIVERGENT
    })
}

pub fn run_report(a: &ReportArgs) -> Result<i32, CliError> {
    let dir = a.run.join("reports");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for p in &paths {
        let r: S3Report = serde_json::from_str(&read(p)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        reports.push(r);
    }
    if a.format == "json" {
        println!(
            "{}",
            serde_json::to_string_pretty(&reports).map_err(|e| CliError::Io(e.to_string()))?
        );
    } else {
        for r in &reports {
            print!("{}", r.to_table());
        }
    }
    Ok(EXIT_OK)
}

fn client_for(cfg: &RunConfig) -> Result<Box<dyn LlmClient>, CliError> {
    let budget = cfg
        .llm
        .context_budget
        .unwrap_or(super::DEFAULT_CONTEXT_BUDGET);
    if let Some(d) = &cfg.llm.mock_dir {
        if !d.is_dir() {
            return Err(CliError::Config(format!(
                "mock directory {} does not exist",
                d.display()
            )));
        }
        return Ok(Box::new(FileMockClient::new(d.clone(), budget)));
    }
    #[cfg(feature = "http")]
    if let Some(h) = &cfg.llm.http {
        return Ok(Box::new(crate::pipeline::HttpClient::new(h.clone())));
    }
    Err(CliError::Config(
        "no model client configured (set llm.mock_dir or llm.http)".into(),
    ))
}

fn transpile_table(run: &TranspileRun) -> String {
    let s = &run.summary;
    let mut t = String::new();
    for j in &run.jobs {
        let status = serde_json::to_value(j.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let _ = writeln!(
            t,
            "{:<24} {:<16} attempts {}",
            j.function,
            status,
            j.attempts.len()
        );
    }
    let _ = writeln!(t, "functions: {}", s.functions);
    let _ = writeln!(t, "compiled: {}/{}", s.compiled, s.functions);
    let _ = writeln!(t, "unsafe: {:.1}% of compiled", s.unsafe_percentage);
    if s.dry_run {
        t.push_str("dry run: no compiler configured, candidates are unchecked\n");
    }
    t
}

pub fn run_transpile(a: &TranspileArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let mut texts = Vec::new();
    for p in &a.inputs {
        texts.push(read(p)?);
    }
    let unit = ingest_c(&texts.join("\n"));
    let client = client_for(cfg)?;
    let adapter = cfg
        .compiler
        .as_ref()
        .map(|t| CommandAdapter::new(t.clone()));
    let cache_dir = cfg
        .cache_dir
        .clone()
        .unwrap_or_else(|| a.common.out.join("struct-cache"));
    let cache = StructCache::load(&cache_dir).map_err(|e| CliError::Input(e.to_string()))?;
    let result = pool(cfg)?.install(|| {
        transpile_unit(
            &unit,
            client.as_ref(),
            adapter.as_ref().map(|x| x as &dyn CompilerAdapter),
            cache,
            &cfg.limits,
        )
    });
    result
        .cache
        .save(&cache_dir)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let mut run = RunDir::create(&a.common.out)?;
    for j in &result.jobs {
        let stem = file_safe(&j.function);
        if let Some(t) = &j.final_text {
            run.write(&format!("candidates/{stem}.rs"), t)?;
        }
        run.write_json(&format!("transcripts/{stem}.json"), j)?;
    }
    for w in &unit.warnings {
        log::warn!("{w}");
    }
    run.write_json("summary.json", &result.summary)?;
    let table = transpile_table(&result);
    run.write("summary.txt", &table)?;
    let inputs: Vec<(&Path, &str)> = a
        .inputs
        .iter()
        .map(PathBuf::as_path)
        .zip(texts.iter().map(String::as_str))
        .collect();
    run.finish("transpile", &inputs, cfg)?;
    print!("{table}");
    Ok(EXIT_OK)
}
