//! Content-addressed media store.
//!
//! Objects are keyed by the SHA-256 of their bytes, so storing the same
//! content twice yields one object. The on-disk layout is
//! `<root>/<first two hex chars>/<digest>` with a `<digest>.json` metadata
//! sidecar. The sidecar is written last: an object counts as present only
//! once its sidecar exists, so readers never observe a half-written object.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Lowercase hex SHA-256 digest identifying a media object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MediaId(String);

impl MediaId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MediaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for MediaId {
    type Err = MediaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit()) {
            Ok(MediaId(s.to_ascii_lowercase()))
        } else {
            Err(MediaError::MalformedId(s.to_string()))
        }
    }
}

impl TryFrom<String> for MediaId {
    type Error = MediaError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<MediaId> for String {
    fn from(value: MediaId) -> Self {
        value.0
    }
}

pub fn content_hash(bytes: &[u8]) -> MediaId {
    MediaId(hex::encode(Sha256::digest(bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaMeta {
    pub media_id: MediaId,
    pub mime: String,
    pub size: u64,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PutOutcome {
    pub media_id: MediaId,
    /// False when the digest was already stored (deduplicated).
    pub created: bool,
}

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("mime type must not be empty")]
    EmptyMime,
    #[error("media `{0}` not found")]
    NotFound(MediaId),
    #[error("malformed media id `{0}`: expected 64 hex chars")]
    MalformedId(String),
    #[error("media io: {0}")]
    Io(#[from] io::Error),
    #[error("media metadata for `{id}` is corrupt: {reason}")]
    CorruptMeta { id: MediaId, reason: String },
}

type MemoryEntries = HashMap<MediaId, (MediaMeta, Arc<[u8]>)>;

#[derive(Debug)]
enum Backend {
    Memory(RwLock<MemoryEntries>),
    Disk(PathBuf),
}

#[derive(Debug)]
pub struct MediaStore {
    backend: Backend,
}

impl MediaStore {
    pub fn in_memory() -> Self {
        Self {
            backend: Backend::Memory(RwLock::default()),
        }
    }

    /// Opens (creating if needed) a filesystem-backed store under `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, MediaError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            backend: Backend::Disk(root),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        match &self.backend {
            Backend::Disk(root) => Some(root),
            Backend::Memory(_) => None,
        }
    }

    pub fn put(&self, bytes: &[u8], mime: &str) -> Result<PutOutcome, MediaError> {
        let mime = mime.trim();
        if mime.is_empty() {
            return Err(MediaError::EmptyMime);
        }
        let media_id = content_hash(bytes);
        let meta = MediaMeta {
            media_id: media_id.clone(),
            mime: mime.to_string(),
            size: bytes.len() as u64,
            created_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        let created = match &self.backend {
            Backend::Memory(map) => {
                let mut map = map.write().expect("media lock poisoned");
                if map.contains_key(&media_id) {
                    false
                } else {
                    map.insert(media_id.clone(), (meta, Arc::from(bytes)));
                    true
                }
            }
            Backend::Disk(root) => put_disk(root, &meta, bytes)?,
        };
        Ok(PutOutcome { media_id, created })
    }

    pub fn get(&self, media_id: &str) -> Result<(Vec<u8>, String), MediaError> {
        let id: MediaId = media_id.parse()?;
        match &self.backend {
            Backend::Memory(map) => {
                let map = map.read().expect("media lock poisoned");
                let (meta, bytes) = map.get(&id).ok_or(MediaError::NotFound(id.clone()))?;
                Ok((bytes.to_vec(), meta.mime.clone()))
            }
            Backend::Disk(root) => {
                let meta = read_meta(root, &id)?;
                let bytes = fs::read(blob_path(root, &id))?;
                Ok((bytes, meta.mime))
            }
        }
    }

    pub fn stat(&self, media_id: &str) -> Result<MediaMeta, MediaError> {
        let id: MediaId = media_id.parse()?;
        match &self.backend {
            Backend::Memory(map) => map
                .read()
                .expect("media lock poisoned")
                .get(&id)
                .map(|(meta, _)| meta.clone())
                .ok_or(MediaError::NotFound(id)),
            Backend::Disk(root) => read_meta(root, &id),
        }
    }

    pub fn contains(&self, media_id: &str) -> bool {
        self.stat(media_id).is_ok()
    }

    /// All stored ids, sorted.
    pub fn ids(&self) -> Result<Vec<MediaId>, MediaError> {
        let mut ids = match &self.backend {
            Backend::Memory(map) => map.read().expect("media lock poisoned").keys().cloned().collect(),
            Backend::Disk(root) => {
                let mut ids = Vec::new();
                for shard in fs::read_dir(root)? {
                    let shard = shard?;
                    if !shard.file_type()?.is_dir() {
                        continue;
                    }
                    for entry in fs::read_dir(shard.path())? {
                        let name = entry?.file_name();
                        let name = name.to_string_lossy();
                        if let Some(stem) = name.strip_suffix(".json") {
                            if let Ok(id) = stem.parse() {
                                ids.push(id);
                            }
                        }
                    }
                }
                ids
            }
        };
        ids.sort();
        Ok(ids)
    }

    pub fn len(&self) -> usize {
        self.ids().map(|ids| ids.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Re-hashes every object and returns the ids whose bytes no longer match.
    pub fn scrub(&self) -> Result<Vec<MediaId>, MediaError> {
        let mut corrupt = Vec::new();
        for id in self.ids()? {
            let (bytes, _) = self.get(id.as_str())?;
            if content_hash(&bytes) != id {
                corrupt.push(id);
            }
        }
        Ok(corrupt)
    }
}

fn shard_dir(root: &Path, id: &MediaId) -> PathBuf {
    root.join(&id.as_str()[..2])
}

fn blob_path(root: &Path, id: &MediaId) -> PathBuf {
    shard_dir(root, id).join(id.as_str())
}

fn meta_path(root: &Path, id: &MediaId) -> PathBuf {
    shard_dir(root, id).join(format!("{}.json", id.as_str()))
}

fn read_meta(root: &Path, id: &MediaId) -> Result<MediaMeta, MediaError> {
    let raw = match fs::read(meta_path(root, id)) {
        Ok(raw) => raw,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(MediaError::NotFound(id.clone())),
        Err(e) => return Err(e.into()),
    };
    serde_json::from_slice(&raw).map_err(|e| MediaError::CorruptMeta {
        id: id.clone(),
        reason: e.to_string(),
    })
}

fn put_disk(root: &Path, meta: &MediaMeta, bytes: &[u8]) -> Result<bool, MediaError> {
    let id = &meta.media_id;
    let meta_file = meta_path(root, id);
    if meta_file.exists() {
        return Ok(false);
    }
    let shard = shard_dir(root, id);
    fs::create_dir_all(&shard)?;

    // Blob first. Identical content under the same name makes concurrent
    // renames harmless.
    let mut blob = tempfile::NamedTempFile::new_in(&shard)?;
    blob.write_all(bytes)?;
    blob.as_file().sync_all()?;
    blob.persist(blob_path(root, id)).map_err(|e| e.error)?;

    let mut sidecar = tempfile::NamedTempFile::new_in(&shard)?;
    serde_json::to_writer_pretty(&mut sidecar, meta).map_err(io::Error::other)?;
    sidecar.as_file().sync_all()?;
    match sidecar.persist_noclobber(&meta_file) {
        Ok(_) => Ok(true),
        // Another writer committed first; its mime wins.
        Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => Ok(false),
        Err(e) => Err(e.error.into()),
    }
}

/// Parses an RFC 3339 timestamp as produced by the store.
pub fn parse_timestamp(ts: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(ts).ok().map(|t| t.with_timezone(&Utc))
}
