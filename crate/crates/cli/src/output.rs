//! Atomic file output and the run manifest.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes).as_slice())
}

/// Output directory that records every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: vec![],
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.written.retain(|f| f.file != name);
        self.written.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.written
    }

    /// Records the effective config and the checksum of every file written so far.
    pub fn write_manifest(&self, config: &RunConfig) -> io::Result<()> {
        let manifest = json!({
            "tool": "qjh",
            "versions": {
                "qjh-cli": env!("CARGO_PKG_VERSION"),
                "qjh-core": qjh_core::VERSION,
            },
            "command": config.command,
            "seed": config.seed,
            "config": config,
            "outputs": self.written,
        });
        let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())
    }
}
