//! Output directory bookkeeping: every file written goes through [`Artifacts`]
//! and ends up in `manifest.json` with its SHA-256.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
    /// `None` for commands that run no verification gate.
    pub gates_passed: Option<bool>,
}

pub struct Artifacts {
    root: PathBuf,
    config_hash: String,
    files: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    kind: &'a str,
    data: &'a T,
}

impl Artifacts {
    pub fn new(root: &Path, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), config_hash: config_hash.to_string(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn files(&self) -> &[ManifestEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        let entry = ManifestEntry { path: rel.to_string(), sha256: hex(&Sha256::digest(bytes)), bytes: bytes.len() };
        match self.files.iter_mut().find(|e| e.path == rel) {
            Some(e) => *e = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    /// JSON document `{config_hash, kind, data}`.
    pub fn write_json<T: Serialize>(&mut self, rel: &str, kind: &str, data: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&Envelope { config_hash: &self.config_hash, kind, data })?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Text with a leading `# config_hash=...` line.
    pub fn write_text(&mut self, rel: &str, body: &str) -> Result<()> {
        let text = format!("# config_hash={}\n{body}", self.config_hash);
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_svg(&mut self, rel: &str, svg: &str) -> Result<()> {
        // keep the XML declaration-free document valid: comment goes after the root tag opens
        let text = match svg.find('>') {
            Some(k) => format!("{}>\n<!-- config_hash={} -->{}", &svg[..k], self.config_hash, &svg[k + 1..]),
            None => svg.to_string(),
        };
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn finish(self, command: &str, seed: u64, gates_passed: Option<bool>) -> Result<Manifest> {
        let mut files = self.files;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: self.config_hash,
            seed,
            files,
            gates_passed,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
