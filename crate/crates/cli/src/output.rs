//! Output directory with a content-hashed manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckStatus {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub files: Vec<FileEntry>,
    pub checks: Vec<CheckStatus>,
    /// Seconds; the only non-reproducible content, and not itself hashed.
    pub wall_times: BTreeMap<String, f64>,
}

pub struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
    checks: Vec<CheckStatus>,
    times: BTreeMap<String, f64>,
    started: Instant,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), checks: Vec::new(), times: BTreeMap::new(), started: Instant::now() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn csv(&mut self, rel: &str, table: &Table) -> Result<(), CliError> {
        self.write(rel, table.render().as_bytes())
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool) {
        self.checks.push(CheckStatus { name: name.into(), pass });
    }

    pub fn checks(&self) -> &[CheckStatus] {
        &self.checks
    }

    pub fn time<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.times.insert(stage.to_string(), t.elapsed().as_secs_f64());
        r
    }

    /// Writes manifest.json (listing every file written so far) and returns it.
    pub fn finish(mut self, command: &str, digest: &str, threads: usize) -> Result<RunManifest, CliError> {
        self.times.insert("total".into(), self.started.elapsed().as_secs_f64());
        let mut versions = BTreeMap::new();
        versions.insert("fracbubble-core".to_string(), fracbubble_core::VERSION.to_string());
        versions.insert("fracbubble-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
        let m = RunManifest {
            command: command.into(),
            config_digest: digest.into(),
            versions,
            threads,
            files: self.files,
            checks: self.checks,
            wall_times: self.times,
        };
        let mut bytes = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Shortest round-trip scientific notation: identical values give identical text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Column names printed as integers.
const INTEGER_COLUMNS: &[&str] = &["k", "iter", "newton_iters"];

/// A CSV table of floats with a fixed header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            for (i, v) in r.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                if INTEGER_COLUMNS.contains(&self.header[i].as_str()) {
                    let _ = write!(s, "{}", *v as i64);
                } else {
                    s.push_str(&fmt_f64(*v));
                }
            }
            s.push('\n');
        }
        s
    }
}
