// SPDX-License-Identifier: Apache-2.0

//! Struct translation cache: one Rust definition per record, persisted as
//! `<record>.rs` files plus a `manifest.json` of content hashes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::context::analyze_field_usage;
use super::ingest::{scan_refs, SourceUnit, TypeRef};
use super::lex::blank_c;
use super::llm::{extract_code, LlmClient};
use super::prompts::{struct_prompt, RecordText, PROMPT_VERSION};
use super::PipelineError;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(s: &str) -> String {
    Sha256::digest(s.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    /// Rust definition, or the C definition when untranslated.
    pub text: String,
    /// Hash of `text`.
    pub hash: String,
    /// Hash of the C definition and prompt version the entry came from.
    pub source_hash: String,
    pub translated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructCache {
    pub entries: BTreeMap<String, CacheEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    prompt_version: String,
    records: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    hash: String,
    source_hash: String,
    translated: bool,
}

fn source_hash(c_def: &str) -> String {
    sha256_hex(&format!("{PROMPT_VERSION}\n{c_def}"))
}

fn valid_record_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_')
}

impl StructCache {
    pub fn get(&self, name: &str) -> Option<&CacheEntry> {
        self.entries.get(name)
    }

    /// How a record should appear in function prompts.
    pub fn record_text(&self, name: &str) -> Option<RecordText<'_>> {
        self.entries.get(name).map(|e| {
            if e.translated {
                RecordText::Translated(&e.text)
            } else {
                RecordText::Untranslated(&e.text)
            }
        })
    }

    /// Loads a persisted cache; a missing directory is an empty cache and
    /// files whose hash disagrees with the manifest are dropped.
    pub fn load(dir: &Path) -> Result<StructCache, PipelineError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(StructCache::default());
        }
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(&path)?)
            .map_err(|e| PipelineError::Cache(format!("{}: {e}", path.display())))?;
        let mut c = StructCache::default();
        if m.prompt_version != PROMPT_VERSION {
            return Ok(c);
        }
        for (name, e) in m.records {
            if !valid_record_name(&name) {
                continue;
            }
            let Ok(text) = std::fs::read_to_string(dir.join(format!("{name}.rs"))) else {
                continue;
            };
            if sha256_hex(&text) != e.hash {
                log::warn!("struct cache entry {name} does not match its manifest hash; ignored");
                continue;
            }
            c.entries.insert(
                name,
                CacheEntry {
                    text,
                    hash: e.hash,
                    source_hash: e.source_hash,
                    translated: e.translated,
                },
            );
        }
        Ok(c)
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        let mut records = BTreeMap::new();
        for (name, e) in &self.entries {
            if !valid_record_name(name) {
                return Err(PipelineError::Cache(format!(
                    "record name '{name}' is not a file name"
                )));
            }
            std::fs::write(dir.join(format!("{name}.rs")), &e.text)?;
            records.insert(
                name.clone(),
                ManifestEntry {
                    hash: e.hash.clone(),
                    source_hash: e.source_hash.clone(),
                    translated: e.translated,
                },
            );
        }
        let m = Manifest {
            prompt_version: PROMPT_VERSION.into(),
            records,
        };
        let json =
            serde_json::to_string_pretty(&m).map_err(|e| PipelineError::Cache(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST), json + "\n")?;
        Ok(())
    }
}

/// Records in dependency order (embedded records first), by name otherwise.
fn record_order(u: &SourceUnit) -> Vec<String> {
    let deps: BTreeMap<&String, BTreeSet<String>> = u
        .records
        .iter()
        .map(|(n, text)| {
            let r = scan_refs(u, &blank_c(text), None, false);
            let ds = r
                .types
                .iter()
                .filter_map(|t| match u.resolve_type(t) {
                    Some(TypeRef::Record(d)) if d != *n => Some(d),
                    _ => None,
                })
                .collect();
            (n, ds)
        })
        .collect();
    let mut done = BTreeSet::new();
    let mut order = Vec::new();
    fn visit(
        n: &str,
        deps: &BTreeMap<&String, BTreeSet<String>>,
        done: &mut BTreeSet<String>,
        order: &mut Vec<String>,
        path: &mut BTreeSet<String>,
    ) {
        if done.contains(n) || !path.insert(n.to_string()) {
            return;
        }
        for d in deps.get(&n.to_string()).into_iter().flatten() {
            visit(d, deps, done, order, path);
        }
        path.remove(n);
        done.insert(n.to_string());
        order.push(n.to_string());
    }
    for n in u.records.keys() {
        visit(n, &deps, &mut done, &mut order, &mut BTreeSet::new());
    }
    order
}

/// Outcome counters of a pre-translation pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PretranslateStats {
    pub reused: usize,
    pub translated: usize,
    pub failed: usize,
    pub llm_calls: usize,
}

/// Gives every record of the unit exactly one cache entry. Entries whose
/// source hash still matches are reused without calling the model; failures
/// after `retries` extra attempts keep the C definition, marked untranslated.
pub fn pretranslate_structs(
    u: &SourceUnit,
    client: &dyn LlmClient,
    mut cache: StructCache,
    retries: usize,
) -> (StructCache, PretranslateStats) {
    let mut stats = PretranslateStats::default();
    for name in record_order(u) {
        let c_def = &u.records[&name];
        let sh = source_hash(c_def);
        if cache
            .entries
            .get(&name)
            .is_some_and(|e| e.source_hash == sh && e.translated)
        {
            stats.reused += 1;
            continue;
        }
        let deps: Vec<(String, String)> = scan_refs(u, &blank_c(c_def), None, false)
            .types
            .iter()
            .filter_map(|t| match u.resolve_type(t) {
                Some(TypeRef::Record(d)) if d != name => cache
                    .get(&d)
                    .filter(|e| e.translated)
                    .map(|e| (d, e.text.clone())),
                _ => None,
            })
            .collect();
        let usage: Vec<_> = analyze_field_usage(u, &name).into_iter().collect();
        let prompt = struct_prompt(&name, c_def, &deps, &usage);
        let mut text = None;
        for _ in 0..=retries {
            stats.llm_calls += 1;
            match client.complete(&prompt) {
                Ok(r) => {
                    let code = extract_code(&r).trim();
                    if !code.is_empty() {
                        text = Some(format!("{code}\n"));
                        break;
                    }
                }
                Err(e) => log::warn!("struct {name}: {e}"),
            }
        }
        let entry = match text {
            Some(t) => {
                stats.translated += 1;
                CacheEntry {
                    hash: sha256_hex(&t),
                    text: t,
                    source_hash: sh,
                    translated: true,
                }
            }
            None => {
                stats.failed += 1;
                CacheEntry {
                    hash: sha256_hex(c_def),
                    text: c_def.clone(),
                    source_hash: sh,
                    translated: false,
                }
            }
        };
        cache.entries.insert(name, entry);
    }
    cache.entries.retain(|n, _| u.records.contains_key(n));
    (cache, stats)
}
