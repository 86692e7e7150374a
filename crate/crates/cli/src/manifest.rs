use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every artifact a command produces.
/// Wall-clock data lives here, never in the artifacts themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputEntry>,
    pub outputs: Vec<String>,
    pub started_at: u64,
    pub finished_at: u64,
    pub wall_clock_seconds: f64,
    #[serde(default)]
    pub extra: serde_json::Value,
    #[serde(skip)]
    clock: Option<Instant>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: serde_json::Value::Null,
            config_digest: String::new(),
            seed: None,
            inputs: vec![],
            outputs: vec![],
            started_at: unix_now(),
            finished_at: 0,
            wall_clock_seconds: 0.0,
            extra: serde_json::Value::Null,
            clock: Some(Instant::now()),
        }
    }

    pub fn set_config<T: Serialize>(&mut self, cfg: &T) {
        let v = serde_json::to_value(cfg).expect("config serializes");
        let canonical = serde_json::to_vec(&v).expect("value serializes");
        self.config_digest = hex::encode(Sha256::digest(&canonical));
        self.config = v;
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputEntry {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    /// `<artifact>.manifest.json`
    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        artifact.with_file_name(name)
    }

    pub fn finish_and_write(&mut self, artifact: &Path) -> Result<PathBuf> {
        self.finished_at = unix_now();
        self.wall_clock_seconds = self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64());
        let path = Self::path_for(artifact);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
