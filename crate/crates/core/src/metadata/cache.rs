//! Fingerprinted response cache. Fixture directories use the same file
//! format: one `<fingerprint>.json` file per query.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LookupQuery, MetadataError};
use crate::fsutil::{to_json_pretty, write_atomic};

/// Seven days.
pub const CACHE_TTL_DEFAULT_SECS: u64 = 7 * 24 * 3600;

/// Stable hash of a normalized query.
pub fn fingerprint(query: &LookupQuery) -> String {
    let canonical = serde_json::to_string(query).expect("query serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub query: LookupQuery,
    pub fetched_at: u64,
    pub ttl: u64,
    /// Response body exactly as first received.
    pub payload: String,
}

impl CacheEntry {
    pub fn is_fresh(&self, now_secs: u64) -> bool {
        now_secs.saturating_sub(self.fetched_at) < self.ttl
    }
}

pub(crate) fn entry_path(dir: &Path, fingerprint: &str) -> PathBuf {
    dir.join(format!("{fingerprint}.json"))
}

pub(crate) fn read_entry(dir: &Path, fingerprint: &str) -> Result<Option<CacheEntry>, MetadataError> {
    let path = entry_path(dir, fingerprint);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(MetadataError::Storage(format!("{}: {e}", path.display()))),
    };
    serde_json::from_slice(&bytes)
        .map(Some)
        .map_err(|e| MetadataError::Decode(format!("{}: {e}", path.display())))
}

/// Writes via a temporary file and rename so readers never see a partial entry.
pub(crate) fn write_entry(dir: &Path, entry: &CacheEntry) -> Result<(), MetadataError> {
    let target = entry_path(dir, &entry.fingerprint);
    write_atomic(&target, to_json_pretty(entry).as_bytes())
        .map_err(|e| MetadataError::Storage(format!("{}: {e}", target.display())))
}
