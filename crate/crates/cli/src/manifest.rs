//! The run manifest: everything needed to reproduce a run, written before
//! the first training step and finalized afterwards.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::appconfig::AppConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub seed: u64,
    pub deterministic: bool,
    /// Fully resolved config, all defaults materialized.
    pub config: AppConfig,
    pub inputs: Vec<InputDigest>,
    pub started: String,
    pub finished: Option<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(CliError::file(path))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(
        command: &str,
        config: AppConfig,
        deterministic: bool,
        inputs: &[&Path],
    ) -> Result<Self, CliError> {
        let mut digests = Vec::with_capacity(inputs.len());
        for p in inputs {
            digests.push(InputDigest {
                path: p.to_path_buf(),
                sha256: sha256_file(p)?,
            });
        }
        Ok(RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.train.seed,
            deterministic,
            config,
            inputs: digests,
            started: now(),
            finished: None,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(CliError::file(dir))?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(&path, text).map_err(CliError::file(&path))?;
        Ok(path)
    }

    pub fn finish(&mut self, dir: &Path) -> Result<(), CliError> {
        self.finished = Some(now());
        self.write(dir)?;
        Ok(())
    }
}
