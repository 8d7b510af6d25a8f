//! Run manifests: the resolved configuration, timings and content hashes of
//! every file a command wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Git's blob hash: `sha1("blob <len>\0" ++ content)`.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub blob: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Canonical config text.
    pub config: String,
    pub fingerprint: String,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub stages: Vec<Stage>,
    pub outputs: Vec<OutputFile>,
    /// Free-form results worth keeping next to the hashes (exit status, gaps).
    pub notes: Vec<(String, String)>,
}

/// Accumulates a manifest while a command runs.
pub struct ManifestBuilder {
    dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(dir: &Path, command: &str, config: String, fingerprint: String) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Ok(ManifestBuilder {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config,
                fingerprint,
                threads: rayon::current_num_threads(),
                started_unix,
                wall_clock_seconds: 0.0,
                stages: Vec::new(),
                outputs: Vec::new(),
                notes: Vec::new(),
            },
            clock: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest.stages.push(Stage { name: name.into(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.notes.push((key.into(), value.to_string()));
    }

    /// Writes `content` to `dir/name` and records its hash.
    pub fn write(&mut self, name: &str, content: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        self.manifest.outputs.retain(|o| o.path != name);
        self.manifest.outputs.push(OutputFile { path: name.into(), blob: blob_hash(content), bytes: content.len() as u64 });
        Ok(path)
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.wall_clock_seconds = self.clock.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.dir.join(MANIFEST_FILE), json + "\n")?;
        Ok(self.manifest)
    }
}

impl RunManifest {
    /// Loads `dir/manifest.json` and checks every recorded output against
    /// its hash.
    pub fn load_verified(dir: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        for o in &m.outputs {
            let path = dir.join(&o.path);
            if blob_hash(&fs::read(&path)?) != o.blob {
                return Err(Error::HashMismatch(path));
            }
        }
        Ok(m)
    }
}
