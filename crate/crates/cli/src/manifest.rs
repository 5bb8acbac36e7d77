use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record written next to the primary output of every run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch when the run started.
    pub started_at: f64,
    pub duration_seconds: f64,
}

pub struct Recorder {
    command: String,
    parameters: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    outputs: Vec<PathBuf>,
    started_at: f64,
    clock: Instant,
}

impl Recorder {
    pub fn new<P: Serialize>(command: &str, parameters: &P, seed: Option<u64>) -> Result<Self> {
        let started_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Ok(Self {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters)?,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at,
            clock: Instant::now(),
        })
    }

    /// Reads an input file, remembering its digest.
    pub fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write(&mut self, path: &Path, contents: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes `<primary>.manifest.json`.
    pub fn finish(self, primary: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            started_at: self.started_at,
            duration_seconds: self.clock.elapsed().as_secs_f64(),
        };
        let path = manifest_path(primary);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}
