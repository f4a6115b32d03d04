//! Knowledge graph, media store, retrieval index and inspection workflow
//! for guided defect assessment.

pub mod classify;
pub mod decision;
pub mod embed;
pub mod eval;
pub mod extract;
pub mod graph;
pub mod media;

pub use classify::{ClassifierProvider, ConfusionMatrix, HistogramCentroidClassifier};
pub use decision::{
    Action, ConformityRule, Decision, InspectionSession, RuleBook, SessionBook, SessionState, Suggestion,
    WorkflowContext, WorkflowError,
};
pub use embed::{cosine_similarity, EmbeddingProvider, EmbeddingVector, HashedBagOfWords, VectorIndex};
pub use eval::{top_n_accuracy, BenchmarkReport, Rank, RetrievalCase};
pub use extract::{Catalog, ExtractorProvider, IngestReport, KnowledgeStores, PatternExtractor};
pub use graph::{Graph, GraphEdge, GraphNode, NodeKind, Triplet};
pub use media::{MediaId, MediaStore};
