use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use tracing::debug;

use super::{sha256_hex, Asset, StoreError, Workspace};
use crate::fsutil::{to_json_pretty, write_atomic};

fn storage(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Storage(format!("{}: {e}", path.display()))
}

/// Sidecar directory holding image payloads, one `<sha256>.bin` per asset.
pub fn assets_dir(path: &Path) -> PathBuf {
    path.with_extension("assets")
}

/// Writes assets first, then the workspace file atomically, then drops
/// asset files no longer referenced.
pub fn save_workspace(ws: &Workspace, path: &Path) -> Result<(), StoreError> {
    let dir = assets_dir(path);
    let used = ws.referenced_assets();
    for sha in &used {
        let bytes = ws.assets.get(sha).ok_or_else(|| StoreError::Invariant(format!("missing asset {sha}")))?;
        let file = dir.join(format!("{sha}.bin"));
        if !file.exists() {
            write_atomic(&file, bytes).map_err(|e| storage(&file, e))?;
        }
    }
    write_atomic(path, to_json_pretty(ws).as_bytes()).map_err(|e| storage(path, e))?;
    if let Ok(entries) = fs::read_dir(&dir) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let keep = name.strip_suffix(".bin").is_some_and(|sha| used.contains(sha));
            if !keep && !name.starts_with('.') {
                debug!(file = %name, "removing unreferenced asset");
                let _ = fs::remove_file(entry.path());
            }
        }
    }
    Ok(())
}

/// Reads and validates a workspace file together with its assets.
pub fn load_workspace(path: &Path) -> Result<Workspace, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| storage(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut ws: Workspace = serde_path_to_error::deserialize(de)
        .map_err(|e| StoreError::Invariant(format!("{}: {} at {}", path.display(), e.inner(), e.path())))?;
    let dir = assets_dir(path);
    let wanted: BTreeSet<String> = ws.referenced_assets();
    for sha in wanted {
        let file = dir.join(format!("{sha}.bin"));
        let bytes = fs::read(&file).map_err(|e| storage(&file, e))?;
        if sha256_hex(&bytes) != sha {
            return Err(StoreError::Invariant(format!("asset {sha} does not match its hash")));
        }
        ws.assets.insert(sha, Asset::from(bytes));
    }
    ws.validate()?;
    Ok(ws)
}

/// A workspace behind a lock, persisted after every successful mutation.
///
/// Mutations may carry the revision the caller last saw; a stale one fails
/// with [`StoreError::Conflict`] and changes nothing.
pub struct WorkspaceStore {
    path: PathBuf,
    inner: RwLock<Workspace>,
}

impl WorkspaceStore {
    /// Loads `path`, or creates and writes a fresh workspace there.
    pub fn open(path: impl Into<PathBuf>, workspace_id: &str) -> Result<Self, StoreError> {
        let path = path.into();
        let ws = if path.exists() {
            load_workspace(&path)?
        } else {
            let ws = Workspace::new(workspace_id);
            save_workspace(&ws, &path)?;
            ws
        };
        Ok(WorkspaceStore { path, inner: RwLock::new(ws) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn read_guard(&self) -> RwLockReadGuard<'_, Workspace> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write_guard(&self) -> RwLockWriteGuard<'_, Workspace> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> Workspace {
        self.read_guard().clone()
    }

    pub fn read<T>(&self, f: impl FnOnce(&Workspace) -> T) -> T {
        f(&self.read_guard())
    }

    pub fn revision(&self) -> u64 {
        self.read_guard().revision
    }

    /// Applies `f` if `expected` (when given) matches the current revision,
    /// persists the result, and returns it with the new revision.
    pub fn mutate<T>(
        &self,
        expected: Option<u64>,
        f: impl FnOnce(&mut Workspace) -> Result<T, StoreError>,
    ) -> Result<(T, u64), StoreError> {
        let mut guard = self.write_guard();
        if let Some(expected) = expected {
            if expected != guard.revision {
                return Err(StoreError::Conflict { expected, actual: guard.revision });
            }
        }
        let mut next = guard.clone();
        let out = f(&mut next)?;
        if next.revision != guard.revision {
            save_workspace(&next, &self.path)?;
        }
        let rev = next.revision;
        *guard = next;
        Ok((out, rev))
    }

    /// Updates in-memory caches that are not part of the persisted state.
    pub fn update_cache(&self, f: impl FnOnce(&mut Workspace)) {
        let mut guard = self.write_guard();
        let rev = guard.revision;
        f(&mut guard);
        assert_eq!(rev, guard.revision, "cache updates must not mutate the workspace");
    }
}
