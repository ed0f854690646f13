//! Output directory handling: atomic writes, content hashes, the run
//! manifest and the worker pool.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

pub const THREADS_ENV: &str = "EMSPEC_THREADS";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| AppError::io(tmp.path(), e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| AppError::io(tmp.path(), e))?;
    }
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_ms: f64,
    pub outputs: Vec<String>,
    /// Per-epoch or per-window problems that did not stop the stage.
    pub soft_errors: usize,
    pub notes: Vec<String>,
    pub metadata: BTreeMap<String, String>,
}

/// Notes kept per stage; the count is always exact.
pub const MAX_NOTES: usize = 50;

impl StageRecord {
    pub fn soft(&mut self, note: String) {
        self.soft_errors += 1;
        if self.notes.len() < MAX_NOTES {
            self.notes.push(note);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: BTreeMap<String, String>,
    /// Input path to sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) to sha256.
    pub outputs: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub const MANIFEST: &str = "manifest.json";

/// The output directory of one pipeline run.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)
    }

    /// Path of an upstream artifact, or an error naming the command that makes it.
    pub fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(AppError::input(format!(
                "missing {}; run `emspec {producer}` first",
                p.display()
            )))
        }
    }

    pub fn load_manifest(&self) -> Manifest {
        std::fs::read(self.path(MANIFEST))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_default()
    }

    /// Merges one stage's record and output hashes into `manifest.json`.
    pub fn record_stage(
        &self,
        stage: &str,
        config: BTreeMap<String, String>,
        inputs: &[PathBuf],
        record: StageRecord,
    ) -> Result<()> {
        let mut m = self.load_manifest();
        m.version = env!("CARGO_PKG_VERSION").to_string();
        m.config = config;
        for p in inputs {
            m.inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        for name in &record.outputs {
            m.outputs
                .insert(name.clone(), sha256_file(&self.path(name))?);
        }
        m.stages.insert(stage.to_string(), record);
        let json = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        self.write(MANIFEST, &json)
    }
}

/// Worker count from `EMSPEC_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(AppError::usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

pub fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| AppError::usage(format!("thread pool: {e}")))
}

/// Parallel map that returns results in input order.
pub fn ordered_map<T, R, F>(pool: &rayon::ThreadPool, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    pool.install(|| items.par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::new(dir.path().join("nested"));
        out.write("a.txt", b"one").unwrap();
        out.write("a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(out.path("a.txt")).unwrap(), b"two");
        assert_eq!(
            sha256_file(&out.path("a.txt")).unwrap(),
            "3fc4ccfe745870e2c0d99f71f30ff0656c8dedd41cc1d7d3d376b0dbe685e2f3"
        );
        assert_eq!(std::fs::read_dir(out.root()).unwrap().count(), 1);
    }

    #[test]
    fn ordered_map_keeps_order() {
        let p = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let v: Vec<usize> = (0..1000).collect();
        assert_eq!(
            ordered_map(&p, &v, |x| x * 2),
            v.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
    }

    #[test]
    fn missing_prerequisite_names_the_command() {
        let dir = tempfile::tempdir().unwrap();
        let e = OutDir::new(dir.path())
            .require("indicators.csv", "indicators")
            .unwrap_err();
        assert!(e.message.contains("emspec indicators"), "{e}");
    }
}
