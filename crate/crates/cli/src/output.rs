use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context as _;
use serde::Serialize;

/// Output directory of a run. Every file is written to a temporary sibling
/// and renamed into place.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp{}", std::process::id()));
        let mut file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(contents.as_bytes())?;
        file.sync_all()?;
        fs::rename(&tmp, &target).with_context(|| format!("renaming into {}", target.display()))?;
        Ok(target)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Drops a stale `error.json` left by an earlier failed run.
    pub fn clear_error(&self) -> anyhow::Result<()> {
        match fs::remove_file(self.path("error.json")) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Wall-clock facts of a run, kept apart from the deterministic reports.
#[derive(Debug, Serialize)]
pub struct Meta {
    pub command: String,
    pub version: &'static str,
    pub started: f64,
    pub finished: f64,
    pub workers: usize,
    pub files: Vec<String>,
    /// Named durations in seconds, e.g. backend timings of `bench`.
    pub timings: serde_json::Map<String, serde_json::Value>,
}

/// Machine-readable failure record.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: u8,
    pub message: String,
    /// Failed check names for invariant failures.
    pub failed_checks: Vec<String>,
}

/// Progress on stderr so that stdout carries only data.
pub fn progress(command: &str, msg: impl std::fmt::Display) {
    eprintln!("[{command}] {msg}");
}
