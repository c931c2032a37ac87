// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::pipeline::{HttpSettings, Limits};
use crate::s3::ScoreConfig;
use crate::symexec::ExecConfig;

/// Which model client the transpile command uses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Directory of scripted responses keyed by prompt hash.
    pub mock_dir: Option<PathBuf>,
    pub http: Option<HttpSettings>,
    /// Token budget of the mock client.
    pub context_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; all cores when unset.
    pub workers: Option<usize>,
    pub exec: ExecConfig,
    pub score: ScoreConfig,
    pub limits: Limits,
    pub llm: LlmConfig,
    /// Compiler command template with a `{file}` placeholder.
    pub compiler: Option<String>,
    /// Struct cache directory; `<run>/struct-cache` when unset.
    pub cache_dir: Option<PathBuf>,
}

pub const DEFAULT_CONTEXT_BUDGET: usize = 4096;

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.exec
            .validate()
            .map_err(|e| CliError::Config(format!("exec: {e}")))?;
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        if self.score.ged.exact_max_nodes == 0 || self.score.ged.budget == 0 {
            return Err(CliError::Config("score.ged limits must be positive".into()));
        }
        if self.llm.mock_dir.is_some() && self.llm.http.is_some() {
            return Err(CliError::Config(
                "llm: choose either mock_dir or http".into(),
            ));
        }
        if self.llm.context_budget == Some(0)
            || self
                .llm
                .http
                .as_ref()
                .is_some_and(|h| h.context_budget == 0)
        {
            return Err(CliError::Config(
                "llm: context budget must be positive".into(),
            ));
        }
        if let Some(c) = &self.compiler {
            if !c.contains("{file}") {
                return Err(CliError::Config(
                    "compiler: template needs a {file} placeholder".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
