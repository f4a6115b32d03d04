//! HTTP service composing the knowledge stores: ingestion, multimodal search
//! with rank fusion, the inspection workflow, persistence and benchmarks.

pub mod config;
pub mod error;
pub mod http;
pub mod persist;
pub mod remote;
pub mod search;
pub mod service;

pub use config::ServiceConfig;
pub use error::ServiceError;
pub use search::{SearchOutcome, SearchRequest, SearchResult};
pub use service::{OakService, Providers};
