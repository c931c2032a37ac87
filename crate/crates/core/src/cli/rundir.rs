// SPDX-License-Identifier: Apache-2.0

//! Run directory: every output file of a command plus `manifest.json`
//! listing them with content hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::pipeline::sha256_hex;

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input files and their hashes.
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    /// Relative output paths and their hashes.
    pub files: BTreeMap<String, String>,
}

pub struct RunDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

/// Keeps output file names to `[A-Za-z0-9_.-]`.
pub fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rel` (forward slashes) under the run directory.
    pub fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.insert(rel.to_string(), sha256_hex(contents));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(rel, &(text + "\n"))
    }

    pub fn finish(
        self,
        command: &str,
        inputs: &[(&Path, &str)],
        config: &impl Serialize,
    ) -> Result<(), CliError> {
        let m = RunManifest {
            tool: "s3diff".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: inputs
                .iter()
                .map(|(p, text)| (p.display().to_string(), sha256_hex(text)))
                .collect(),
            config: serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?,
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        let path = self.root.join(RUN_MANIFEST);
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
