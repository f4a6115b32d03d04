use oak_core::decision::WorkflowError;
use oak_core::embed::EmbedError;
use oak_core::eval::EvalError;
use oak_core::extract::ExtractError;
use oak_core::graph::GraphError;
use oak_core::media::MediaError;
use thiserror::Error;

use crate::persist::SnapshotError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("request has no text, transcript or image")]
    NoModality,
    #[error("unknown media `{0}`")]
    UnknownMedia(String),
    #[error("unknown defect `{0}`")]
    UnknownDefect(String),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Ingest(#[from] ExtractError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Config(_) => "config",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NoModality => "no_modality",
            ServiceError::UnknownMedia(_) => "unknown_media",
            ServiceError::UnknownDefect(_) => "unknown_defect",
            ServiceError::Media(MediaError::NotFound(_)) => "unknown_media",
            ServiceError::Media(MediaError::MalformedId(_)) => "malformed_media_id",
            ServiceError::Media(MediaError::EmptyMime) => "empty_mime",
            ServiceError::Media(_) => "media",
            ServiceError::Workflow(e) => match e {
                WorkflowError::IllegalTransition { .. } => "illegal_transition",
                WorkflowError::UnknownSession(_) => "unknown_session",
                WorkflowError::UnknownDefect(_) => "unknown_defect",
                WorkflowError::UnknownMedia(_) => "unknown_media",
                WorkflowError::UnknownNode(_) => "unknown_node",
                WorkflowError::OverrideCommentRequired => "override_comment_required",
                WorkflowError::Log(_) => "event_log",
                _ => "invalid_workflow_input",
            },
            ServiceError::Ingest(ExtractError::Parse(_)) => "parse_error",
            ServiceError::Ingest(_) => "ingest",
            ServiceError::Graph(GraphError::UnknownNode(_)) => "unknown_node",
            ServiceError::Graph(_) => "graph",
            ServiceError::Embed(EmbedError::Provider(_)) => "provider_unavailable",
            ServiceError::Embed(_) => "embedding",
            ServiceError::Eval(EvalError::UnknownDataset(_)) => "unknown_dataset",
            ServiceError::Eval(_) => "evaluation",
            ServiceError::Snapshot(SnapshotError::VersionMismatch { .. }) => "version_mismatch",
            ServiceError::Snapshot(SnapshotError::Corrupt(_)) => "corrupt_snapshot",
            ServiceError::Snapshot(_) => "snapshot",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.code() {
            "bad_request" | "no_modality" | "malformed_media_id" | "empty_mime" | "invalid_workflow_input"
            | "parse_error" | "graph" | "embedding" | "unknown_dataset" | "evaluation" => 400,
            "unknown_media" | "unknown_defect" | "unknown_session" | "unknown_node" => 404,
            "illegal_transition" => 409,
            "override_comment_required" => 422,
            "provider_unavailable" => 502,
            _ => 500,
        }
    }
}
