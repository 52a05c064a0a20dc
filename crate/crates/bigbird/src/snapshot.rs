//! State snapshots: one JSON document per system state.

use std::io::Write;
use std::path::{Path, PathBuf};

use bigbird_core::platform::{PlatformConfig, State};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("snapshot schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

#[derive(Serialize)]
struct Out<'a> {
    schema_version: u32,
    #[serde(flatten)]
    state: &'a State,
}

#[derive(Deserialize)]
struct In {
    #[serde(flatten)]
    state: State,
}

pub fn to_bytes(state: &State) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&Out {
        schema_version: SCHEMA_VERSION,
        state,
    })
    .expect("state serializes");
    bytes.push(b'\n');
    bytes
}

pub fn from_bytes(bytes: &[u8]) -> Result<State, SnapshotError> {
    let doc: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| SnapshotError::CorruptSnapshot(e.to_string()))?;
    let found = doc
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| SnapshotError::CorruptSnapshot("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(SnapshotError::VersionMismatch { found });
    }
    let parsed: In = serde_json::from_value(doc).map_err(|e| SnapshotError::CorruptSnapshot(e.to_string()))?;
    Ok(parsed.state)
}

/// Write the snapshot next to `path` and rename it into place, so a crash
/// leaves either the old or the new snapshot.
pub fn save(path: &Path, state: &State) -> Result<(), SnapshotError> {
    let io = |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(&to_bytes(state)).map_err(io)?;
    file.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load(path: &Path) -> Result<State, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes)
}

/// Load the snapshot at `path`, or a fresh state if there is none yet.
pub fn load_or_new(path: &Path, config: &PlatformConfig) -> Result<State, SnapshotError> {
    if path.exists() {
        load(path)
    } else {
        Ok(State::new(config))
    }
}
