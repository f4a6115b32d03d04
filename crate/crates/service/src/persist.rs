//! Version-stamped snapshots of the graph, vector index and rule book.
//!
//! Layout under the data directory:
//!
//! ```text
//! snapshot/
//!   manifest.json   {version, created_at, files: {name: sha256}, digest}
//!   graph.json
//!   index.jsonl
//!   rules.json
//! ```
//!
//! A save is written to a scratch directory and renamed into place, so a
//! crash leaves either the previous snapshot or the new one.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use oak_core::decision::RuleBook;
use oak_core::embed::VectorIndex;
use oak_core::graph::Graph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_DIR: &str = "snapshot";
const PREVIOUS_DIR: &str = "snapshot.previous";
const SCRATCH_PREFIX: &str = "snapshot.tmp-";
const MANIFEST: &str = "manifest.json";
const GRAPH_FILE: &str = "graph.json";
const INDEX_FILE: &str = "index.jsonl";
const RULES_FILE: &str = "rules.json";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
    #[error("snapshot index was built by `{snapshot}` but the configured embedder is `{configured}`")]
    ProviderMismatch { snapshot: String, configured: String },
    #[error("snapshot io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub created_at: String,
    pub files: BTreeMap<String, String>,
    pub digest: String,
}

impl Manifest {
    fn compute_digest(version: u32, created_at: &str, files: &BTreeMap<String, String>) -> String {
        let canonical = serde_json::json!({ "version": version, "created_at": created_at, "files": files });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotState {
    pub graph: Graph,
    pub index: VectorIndex,
    pub rules: RuleBook,
}

pub fn snapshot_dir(data_dir: &Path) -> PathBuf {
    data_dir.join(SNAPSHOT_DIR)
}

fn write_synced(path: &Path, bytes: &[u8]) -> io::Result<String> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn sync_dir(dir: &Path) {
    // Directory fsync is not available on every platform; best effort.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

/// Writes a complete snapshot and atomically replaces the previous one.
pub fn save_snapshot(
    data_dir: &Path,
    graph: &Graph,
    index: &VectorIndex,
    rules: &RuleBook,
) -> Result<Manifest, SnapshotError> {
    fs::create_dir_all(data_dir)?;
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    let scratch = data_dir.join(format!("{SCRATCH_PREFIX}{}-{nanos}", std::process::id()));
    fs::create_dir(&scratch)?;

    let mut index_bytes = Vec::new();
    index.write_snapshot(&mut index_bytes)?;
    let rules_json = serde_json::to_string_pretty(rules).map_err(io::Error::other)?;

    let mut files = BTreeMap::new();
    files.insert(GRAPH_FILE.to_string(), write_synced(&scratch.join(GRAPH_FILE), graph.to_json().as_bytes())?);
    files.insert(INDEX_FILE.to_string(), write_synced(&scratch.join(INDEX_FILE), &index_bytes)?);
    files.insert(RULES_FILE.to_string(), write_synced(&scratch.join(RULES_FILE), rules_json.as_bytes())?);

    let created_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let manifest = Manifest {
        version: SNAPSHOT_VERSION,
        digest: Manifest::compute_digest(SNAPSHOT_VERSION, &created_at, &files),
        created_at,
        files,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    write_synced(&scratch.join(MANIFEST), manifest_json.as_bytes())?;
    sync_dir(&scratch);

    let current = snapshot_dir(data_dir);
    let previous = data_dir.join(PREVIOUS_DIR);
    if previous.exists() {
        fs::remove_dir_all(&previous)?;
    }
    if current.exists() {
        fs::rename(&current, &previous)?;
    }
    fs::rename(&scratch, &current)?;
    sync_dir(data_dir);
    if previous.exists() {
        fs::remove_dir_all(&previous)?;
    }
    Ok(manifest)
}

/// Cleans up after an interrupted save: scratch directories are removed and
/// a snapshot caught mid-swap is restored.
pub fn recover_interrupted_save(data_dir: &Path) -> io::Result<()> {
    let Ok(entries) = fs::read_dir(data_dir) else {
        return Ok(());
    };
    for entry in entries {
        let entry = entry?;
        if entry.file_name().to_string_lossy().starts_with(SCRATCH_PREFIX) {
            fs::remove_dir_all(entry.path())?;
        }
    }
    let current = snapshot_dir(data_dir);
    let previous = data_dir.join(PREVIOUS_DIR);
    if previous.exists() {
        if current.exists() {
            fs::remove_dir_all(&previous)?;
        } else {
            fs::rename(&previous, &current)?;
        }
    }
    Ok(())
}

fn read_verified(dir: &Path, manifest: &Manifest, name: &str) -> Result<Vec<u8>, SnapshotError> {
    let expected = manifest
        .files
        .get(name)
        .ok_or_else(|| SnapshotError::Corrupt(format!("manifest does not list {name}")))?;
    let bytes = fs::read(dir.join(name)).map_err(|e| SnapshotError::Corrupt(format!("{name}: {e}")))?;
    if hex::encode(Sha256::digest(&bytes)) != *expected {
        return Err(SnapshotError::Corrupt(format!("{name} does not match its manifest hash")));
    }
    Ok(bytes)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, SnapshotError> {
    let raw = fs::read_to_string(dir.join(MANIFEST))
        .map_err(|e| SnapshotError::Corrupt(format!("cannot read {MANIFEST} in {}: {e}", dir.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| SnapshotError::Corrupt(format!("{MANIFEST}: {e}")))?;
    let found = value.get("version").and_then(serde_json::Value::as_u64);
    match found {
        Some(v) if v == u64::from(SNAPSHOT_VERSION) => {}
        Some(v) => {
            return Err(SnapshotError::VersionMismatch {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: SNAPSHOT_VERSION,
            })
        }
        None => return Err(SnapshotError::Corrupt(format!("{MANIFEST} has no version"))),
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| SnapshotError::Corrupt(format!("{MANIFEST}: {e}")))?;
    if Manifest::compute_digest(manifest.version, &manifest.created_at, &manifest.files) != manifest.digest {
        return Err(SnapshotError::Corrupt("manifest digest mismatch".into()));
    }
    Ok(manifest)
}

/// Loads and verifies the snapshot stored in `dir`.
pub fn load_snapshot(dir: &Path) -> Result<SnapshotState, SnapshotError> {
    let manifest = read_manifest(dir)?;
    let graph_bytes = read_verified(dir, &manifest, GRAPH_FILE)?;
    let index_bytes = read_verified(dir, &manifest, INDEX_FILE)?;
    let rules_bytes = read_verified(dir, &manifest, RULES_FILE)?;

    let graph_json =
        String::from_utf8(graph_bytes).map_err(|_| SnapshotError::Corrupt(format!("{GRAPH_FILE} is not utf-8")))?;
    let graph = Graph::from_json(&graph_json).map_err(|e| SnapshotError::Corrupt(format!("{GRAPH_FILE}: {e}")))?;
    let index = VectorIndex::read_snapshot(BufReader::new(index_bytes.as_slice()))
        .map_err(|e| SnapshotError::Corrupt(format!("{INDEX_FILE}: {e}")))?;
    let rules: RuleBook =
        serde_json::from_slice(&rules_bytes).map_err(|e| SnapshotError::Corrupt(format!("{RULES_FILE}: {e}")))?;
    Ok(SnapshotState { graph, index, rules })
}
