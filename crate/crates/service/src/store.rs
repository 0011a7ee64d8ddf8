//! Single-node embedded store: the whole state is one JSON document,
//! replaced by write-to-temp, fsync, rename. A commit becomes visible to
//! readers only after it is durable. Model documents are separate
//! write-once files under `models/`.
//!
//! Swap point: [`Store`] is the only type touching the disk.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::error::ApiError;
use crate::state::{State, STATE_FORMAT_VERSION};

pub const STATE_FILE: &str = "state.json";
pub const MODELS_DIR: &str = "models";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: corrupt state: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to `path` so that readers see either the old or the new
/// contents, never a torn file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    // Persist the rename itself; not every platform can open a directory.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub struct Store {
    dir: PathBuf,
    current: Mutex<Arc<State>>,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.join(MODELS_DIR)).map_err(io_err(dir))?;
        let path = dir.join(STATE_FILE);
        let state = if path.exists() {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let state: State = serde_json::from_str(&text)
                .map_err(|e| StoreError::Corrupt { path: path.clone(), message: e.to_string() })?;
            if state.format_version != STATE_FORMAT_VERSION {
                return Err(StoreError::Corrupt {
                    path,
                    message: format!("unsupported format version {}", state.format_version),
                });
            }
            state
        } else {
            State::default()
        };
        Ok(Self { dir: dir.to_path_buf(), current: Mutex::new(Arc::new(state)) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The last committed state.
    pub fn read(&self) -> Arc<State> {
        self.current.lock().expect("store lock").clone()
    }

    /// Applies `f` to a copy of the state, persists it and publishes it.
    /// Nothing changes when `f` or the write fails. Commits are serialized.
    pub fn commit<R>(&self, f: impl FnOnce(&mut State) -> Result<R, ApiError>) -> Result<R, ApiError> {
        let mut guard = self.current.lock().expect("store lock");
        let mut next = State::clone(&guard);
        let out = f(&mut next)?;
        let bytes = serde_json::to_vec(&next).map_err(|e| ApiError::internal(e.to_string()))?;
        atomic_write(&self.dir.join(STATE_FILE), &bytes)
            .map_err(|e| ApiError::internal(format!("persisting state: {e}")))?;
        *guard = Arc::new(next);
        Ok(out)
    }

    pub fn model_path(&self, file: &str) -> PathBuf {
        self.dir.join(MODELS_DIR).join(file)
    }

    pub fn write_model(&self, file: &str, text: &str) -> Result<(), ApiError> {
        atomic_write(&self.model_path(file), text.as_bytes())
            .map_err(|e| ApiError::internal(format!("writing model {file}: {e}")))
    }

    pub fn read_model(&self, file: &str) -> Result<String, StoreError> {
        let path = self.model_path(file);
        fs::read_to_string(&path).map_err(io_err(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_commit_changes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.commit(|s| {
            s.counters.round = 3;
            Ok(())
        })
        .unwrap();
        let err = store.commit(|s| {
            s.counters.round = 9;
            Err::<(), _>(ApiError::conflict("no"))
        });
        assert!(err.is_err());
        assert_eq!(store.read().counters.round, 3);
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.read().counters.round, 3);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
