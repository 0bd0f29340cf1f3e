use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Run record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, FileDigest>,
    pub seeds: Vec<u64>,
    pub model_sha256: Option<String>,
    pub outputs: BTreeMap<String, String>,
    pub started_at: u64,
    pub finished_at: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn start(command: &str, config: impl Serialize) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
            model_sha256: None,
            outputs: BTreeMap::new(),
            started_at: unix_now(),
            finished_at: 0,
        }
    }

    pub fn input(&mut self, name: &str, path: Option<&Path>) -> Result<(), CliError> {
        if let Some(path) = path {
            let sha256 = file_sha256(path)?;
            self.inputs.insert(
                name.to_string(),
                FileDigest {
                    path: path.to_path_buf(),
                    sha256,
                },
            );
        }
        Ok(())
    }

    pub fn output(&mut self, dir: &Path, file: &str) -> Result<(), CliError> {
        let sha = file_sha256(&dir.join(file))?;
        self.outputs.insert(file.to_string(), sha);
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<(), CliError> {
        self.finished_at = unix_now();
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Data(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text + "\n").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
