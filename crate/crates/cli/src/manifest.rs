use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".amalgam.lock";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Incomplete,
}

/// Written when a run starts and rewritten when it ends. A run that stops
/// on an error is left `incomplete`, listing the files it did emit.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub name: String,
    pub command: String,
    pub status: RunStatus,
    /// SHA-256 of the effective config (after command-line overrides).
    pub config_hash: String,
    pub spec_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub files: Vec<String>,
    pub pass: Option<bool>,
    pub error: Option<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&tmp, text)?;
        fs::rename(tmp, dir.join(MANIFEST_FILE))
    }

    pub fn finish(&mut self, pass: bool) {
        self.status = RunStatus::Complete;
        self.pass = Some(pass);
        self.finished_unix = Some(unix_now());
    }

    pub fn abort(&mut self, error: String) {
        self.status = RunStatus::Incomplete;
        self.error = Some(error);
        self.finished_unix = Some(unix_now());
    }
}

/// Exclusive ownership of an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> io::Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(io::Error::new(
                e.kind(),
                format!(
                    "{} exists; another run owns this directory (delete the file if it crashed)",
                    path.display()
                ),
            )),
            Err(e) => Err(e),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(OutputLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }
}
