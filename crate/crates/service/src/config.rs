use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const DATA_DIR_ENV: &str = "OAK_DATA_DIR";

/// Embedding provider: the builtin hashed bag-of-words, or a remote model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSelection {
    Builtin,
    Remote { url: String, dim: usize },
}

/// Extractor or classifier provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderSelection {
    Builtin,
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteSelection {
    Identity,
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub listen: String,
    pub embedding: EmbeddingSelection,
    pub extractor: ProviderSelection,
    pub classifier: ProviderSelection,
    pub rewrite: RewriteSelection,
    pub default_rating_weight: f64,
    /// Result count when a search request omits `k`.
    pub default_k: usize,
    pub remote_timeout_ms: u64,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
    /// Save a snapshot after each successful ingestion.
    pub autosave: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("oak-data"),
            listen: "127.0.0.1:8080".into(),
            embedding: EmbeddingSelection::Builtin,
            extractor: ProviderSelection::Builtin,
            classifier: ProviderSelection::Builtin,
            rewrite: RewriteSelection::Identity,
            default_rating_weight: 0.0,
            default_k: 10,
            remote_timeout_ms: 2000,
            bearer_token: None,
            autosave: true,
        }
    }
}

impl ServiceConfig {
    pub fn for_data_dir(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            ..Self::default()
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ServiceError> {
        serde_json::from_str(json).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads a config file, or the defaults when `path` is `None`, then
    /// applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut config = match path {
            Some(p) => {
                let raw = fs::read_to_string(p)
                    .map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
                Self::from_json(&raw)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(dir) = lookup(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
            self.data_dir = PathBuf::from(dir);
        }
    }

    /// Checks value ranges and that `data_dir` can be created and written.
    pub fn validate(&self) -> Result<(), ServiceError> {
        if !self.default_rating_weight.is_finite() || self.default_rating_weight < 0.0 {
            return Err(ServiceError::Config("default_rating_weight must be a finite value >= 0".into()));
        }
        if self.default_k == 0 {
            return Err(ServiceError::Config("default_k must be at least 1".into()));
        }
        if let EmbeddingSelection::Remote { dim: 0, .. } = self.embedding {
            return Err(ServiceError::Config("remote embedding dim must be at least 1".into()));
        }
        fs::create_dir_all(&self.data_dir)
            .map_err(|e| ServiceError::Config(format!("data_dir {}: {e}", self.data_dir.display())))?;
        tempfile::tempfile_in(&self.data_dir)
            .map_err(|e| ServiceError::Config(format!("data_dir {} is not writable: {e}", self.data_dir.display())))?;
        Ok(())
    }
}
