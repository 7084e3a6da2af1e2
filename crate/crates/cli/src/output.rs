//! Atomic output files and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes through a temporary file in the destination directory, renamed
/// into place once complete.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: Option<String>,
}

impl InputRecord {
    pub fn of(path: &Path) -> Self {
        InputRecord {
            path: path.display().to_string(),
            sha256: std::fs::read(path).ok().map(|b| sha256_hex(&b)),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub cam_cli: &'static str,
    pub cam_core: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
    pub versions: Versions,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub conventions: serde_json::Value,
    pub warnings: Vec<String>,
}

/// Collects what a command read, wrote and warned about.
#[derive(Debug, Default)]
pub struct RunLog {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub quiet: bool,
}

impl RunLog {
    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.quiet {
            eprintln!("warning: {msg}");
        }
        self.warnings.push(msg);
    }

    pub fn write(&mut self, path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        write_atomic(path, fill)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }
}
