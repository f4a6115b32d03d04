//! The composed service: every store behind one handle, safe to share across
//! request threads.
//!
//! Graph, index and rules are published together as one immutable
//! [`Knowledge`] value. Readers clone the current `Arc` and never wait for a
//! writer; writers are serialized, build the next value, and swap it in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::Duration;

use oak_core::classify::{classify_image, ClassifierProvider, ClassifyError, HistogramCentroidClassifier};
use oak_core::decision::{
    AssessmentGuide, ConformityRule, Decision, InspectionSession, MeasurementRecord, RuleBook, SessionBook,
    Suggestion, WorkflowContext,
};
use oak_core::embed::{embed_text, EmbedError, EmbeddingProvider, HashedBagOfWords, VectorIndex};
use oak_core::eval::{run_named_benchmark, BenchmarkReport};
use oak_core::extract::{
    ingest_catalog, ingest_document, load_catalog, Catalog, ExtractorProvider, IngestReport, KnowledgeStores,
    PatternExtractor, PROP_INSTRUCTION,
};
use oak_core::graph::{Direction, Graph, GraphNode, NodeKind, RatingAggregate, Triplet, HAS_IMAGE};
use oak_core::media::{MediaId, MediaStore, PutOutcome};
use serde::{Deserialize, Serialize};

use crate::config::{EmbeddingSelection, ProviderSelection, RewriteSelection, ServiceConfig};
use crate::error::ServiceError;
use crate::persist::{self, Manifest, SnapshotError};
use crate::remote::{RemoteClassifier, RemoteClient, RemoteEmbedder, RemoteExtractor, Rewriter};
use crate::search::{
    collapse_by_node, fuse, Channel, SearchOutcome, SearchRequest, EVIDENCE_TEXTS, IMAGE_CHANNEL, TEXT_CHANNEL,
};

pub const EVENT_LOG: &str = "events.jsonl";
pub const MEDIA_DIR: &str = "media";

pub enum ClassifierBackend {
    /// Nearest-centroid over catalog images, rebuilt after each ingestion.
    Builtin(RwLock<HistogramCentroidClassifier>),
    Remote(Box<dyn ClassifierProvider>),
}

/// The model providers a service runs with.
pub struct Providers {
    pub embedder: Box<dyn EmbeddingProvider>,
    pub extractor: Box<dyn ExtractorProvider>,
    pub classifier: ClassifierBackend,
    pub rewriter: Rewriter,
}

impl Providers {
    pub fn builtin() -> Self {
        Self {
            embedder: Box::new(HashedBagOfWords::default()),
            extractor: Box::new(PatternExtractor),
            classifier: ClassifierBackend::Builtin(RwLock::default()),
            rewriter: Rewriter::Identity,
        }
    }

    pub fn from_config(config: &ServiceConfig) -> Self {
        let timeout = Duration::from_millis(config.remote_timeout_ms);
        let client = |url: &str| RemoteClient::new(url, timeout);
        Self {
            embedder: match &config.embedding {
                EmbeddingSelection::Builtin => Box::new(HashedBagOfWords::default()),
                EmbeddingSelection::Remote { url, dim } => Box::new(RemoteEmbedder::new(client(url), *dim)),
            },
            extractor: match &config.extractor {
                ProviderSelection::Builtin => Box::new(PatternExtractor),
                ProviderSelection::Remote { url } => Box::new(RemoteExtractor::new(client(url))),
            },
            classifier: match &config.classifier {
                ProviderSelection::Builtin => ClassifierBackend::Builtin(RwLock::default()),
                ProviderSelection::Remote { url } => {
                    ClassifierBackend::Remote(Box::new(RemoteClassifier::new(client(url))))
                }
            },
            rewriter: match &config.rewrite {
                RewriteSelection::Identity => Rewriter::Identity,
                RewriteSelection::Remote { url } => Rewriter::Remote(client(url)),
            },
        }
    }
}

/// Graph, index and rules as one consistent value.
#[derive(Debug, Clone)]
pub struct Knowledge {
    pub graph: Arc<Graph>,
    pub index: Arc<VectorIndex>,
    pub rules: Arc<RuleBook>,
}

struct Ctx<'a> {
    graph: &'a Graph,
    media: &'a MediaStore,
}

impl WorkflowContext for Ctx<'_> {
    fn defect_exists(&self, defect_id: &str) -> bool {
        self.graph.node(defect_id).is_some_and(|n| n.kind == NodeKind::Defect)
    }

    fn media_exists(&self, media_id: &str) -> bool {
        self.media.contains(media_id)
    }

    fn node_exists(&self, node_id: &str) -> bool {
        self.graph.contains(node_id)
    }

    fn instruction(&self, defect_id: &str) -> Option<String> {
        self.graph.node(defect_id)?.prop_str(PROP_INSTRUCTION).map(str::to_string)
    }

    fn guide_media(&self, defect_id: &str) -> Vec<String> {
        image_ids(self.graph, defect_id)
    }
}

fn image_ids(graph: &Graph, defect_id: &str) -> Vec<String> {
    graph
        .neighbors(defect_id, Some(HAS_IMAGE), Direction::Out)
        .map(|ns| ns.into_iter().map(|n| n.id).collect())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextView {
    pub context_id: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectView {
    pub defect: GraphNode,
    pub neighbors: Vec<GraphNode>,
    pub contexts: Vec<ContextView>,
    pub image_ids: Vec<String>,
    pub rules: Vec<ConformityRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub nodes: usize,
    pub edges: usize,
    pub contexts: usize,
    pub media: usize,
    pub rules: usize,
    pub sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub embedder: String,
    pub counts: Counts,
}

pub struct OakService {
    config: ServiceConfig,
    knowledge: RwLock<Arc<Knowledge>>,
    media: MediaStore,
    sessions: SessionBook,
    providers: Providers,
    writer: Mutex<()>,
}

impl std::fmt::Debug for OakService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OakService").field("data_dir", &self.config.data_dir).finish_non_exhaustive()
    }
}

impl OakService {
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let providers = Providers::from_config(&config);
        Self::open_with(config, providers)
    }

    /// Opens the data directory: loads the latest snapshot if any, then
    /// replays the session event log on top.
    pub fn open_with(config: ServiceConfig, providers: Providers) -> Result<Self, ServiceError> {
        config.validate()?;
        let data_dir = config.data_dir.clone();
        persist::recover_interrupted_save(&data_dir).map_err(SnapshotError::from)?;
        let media = MediaStore::open(data_dir.join(MEDIA_DIR))?;
        let knowledge = Self::read_knowledge(&data_dir, providers.embedder.as_ref())?;
        let sessions = SessionBook::open(data_dir.join(EVENT_LOG))?;
        let service = Self {
            config,
            knowledge: RwLock::new(Arc::new(knowledge)),
            media,
            sessions,
            providers,
            writer: Mutex::new(()),
        };
        service.apply_ratings();
        service.rebuild_classifier();
        Ok(service)
    }

    fn read_knowledge(data_dir: &Path, embedder: &dyn EmbeddingProvider) -> Result<Knowledge, ServiceError> {
        let dir = persist::snapshot_dir(data_dir);
        if !dir.exists() {
            return Ok(Knowledge {
                graph: Arc::new(Graph::new()),
                index: Arc::new(VectorIndex::for_provider(embedder)),
                rules: Arc::new(RuleBook::new()),
            });
        }
        let state = persist::load_snapshot(&dir)?;
        if state.index.provider_name() != embedder.name() || state.index.dim() != embedder.dim() {
            return Err(SnapshotError::ProviderMismatch {
                snapshot: state.index.provider_name().to_string(),
                configured: embedder.name().to_string(),
            }
            .into());
        }
        Ok(Knowledge {
            graph: Arc::new(state.graph),
            index: Arc::new(state.index),
            rules: Arc::new(state.rules),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn data_dir(&self) -> &PathBuf {
        &self.config.data_dir
    }

    pub fn knowledge(&self) -> Arc<Knowledge> {
        self.knowledge.read().expect("knowledge lock poisoned").clone()
    }

    pub fn media(&self) -> &MediaStore {
        &self.media
    }

    pub fn sessions(&self) -> &SessionBook {
        &self.sessions
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        self.providers.embedder.as_ref()
    }

    fn lock_writer(&self) -> MutexGuard<'_, ()> {
        self.writer.lock().expect("writer lock poisoned")
    }

    fn publish(&self, next: Knowledge) {
        *self.knowledge.write().expect("knowledge lock poisoned") = Arc::new(next);
    }

    /// Pushes the session book's rating aggregates onto graph nodes.
    fn apply_ratings(&self) {
        let _w = self.lock_writer();
        let mut next = (*self.knowledge()).clone();
        let graph = Arc::make_mut(&mut next.graph);
        for (node, aggregate) in self.sessions.ratings().all() {
            if graph.contains(&node) {
                graph.set_rating(&node, Some(aggregate)).expect("node exists");
            }
        }
        self.publish(next);
    }

    fn rebuild_classifier(&self) {
        let ClassifierBackend::Builtin(lock) = &self.providers.classifier else {
            return;
        };
        let kn = self.knowledge();
        let mut classifier = HistogramCentroidClassifier::new();
        for defect in kn.graph.nodes_of_kind(NodeKind::Defect) {
            for image in image_ids(&kn.graph, &defect.id) {
                if let Ok((bytes, _)) = self.media.get(&image) {
                    let _ = classifier.register(&defect.id, &bytes);
                }
            }
        }
        *lock.write().expect("classifier lock poisoned") = classifier;
    }

    /// Runs one serialized mutation against a private copy of the knowledge
    /// and publishes it only if `apply` succeeds.
    fn mutate<R>(
        &self,
        apply: impl FnOnce(&mut KnowledgeStores<'_>, &dyn ExtractorProvider) -> Result<R, ServiceError>,
    ) -> Result<R, ServiceError> {
        let _w = self.lock_writer();
        let mut next = (*self.knowledge()).clone();
        let out = {
            let Knowledge { graph, index, rules } = &mut next;
            let mut stores = KnowledgeStores {
                graph: Arc::make_mut(graph),
                index: Arc::make_mut(index),
                media: &self.media,
                rules: Arc::make_mut(rules),
                embedder: self.providers.embedder.as_ref(),
            };
            apply(&mut stores, self.providers.extractor.as_ref())?
        };
        self.publish(next.clone());
        self.rebuild_classifier();
        if self.config.autosave {
            persist::save_snapshot(&self.config.data_dir, &next.graph, &next.index, &next.rules)?;
        }
        Ok(out)
    }

    pub fn put_media(&self, bytes: &[u8], mime: &str) -> Result<PutOutcome, ServiceError> {
        Ok(self.media.put(bytes, mime)?)
    }

    pub fn get_media(&self, media_id: &str) -> Result<(Vec<u8>, String), ServiceError> {
        Ok(self.media.get(media_id)?)
    }

    /// Ingests a catalog whose images are already-stored media ids.
    pub fn ingest_catalog(&self, catalog: &Catalog) -> Result<IngestReport, ServiceError> {
        self.mutate(|stores, _| Ok(ingest_catalog(stores, catalog, None)?))
    }

    pub fn ingest_catalog_json(&self, json: &str) -> Result<IngestReport, ServiceError> {
        self.ingest_catalog(&Catalog::from_json(json)?)
    }

    /// Ingests a catalog file; image paths are relative to the file.
    pub fn ingest_catalog_file(&self, path: &Path) -> Result<IngestReport, ServiceError> {
        self.mutate(|stores, _| Ok(load_catalog(stores, path)?))
    }

    pub fn ingest_document(&self, bytes: &[u8], mime: &str) -> Result<IngestReport, ServiceError> {
        self.mutate(|stores, extractor| Ok(ingest_document(stores, bytes, mime, extractor)?))
    }

    pub fn insert_triplet(&self, subject: &str, relation: &str, object: &str) -> Result<Triplet, ServiceError> {
        let triplet = Triplet::new(subject, relation, object)?;
        self.mutate(|stores, _| {
            stores.graph.insert_triplet(&triplet)?;
            Ok(triplet.clone())
        })
    }

    pub fn search(&self, req: &SearchRequest) -> Result<SearchOutcome, ServiceError> {
        let k = req.k.unwrap_or(self.config.default_k);
        if k == 0 {
            return Err(ServiceError::BadRequest("k must be at least 1".into()));
        }
        let rating_weight = req.rating_weight.unwrap_or(self.config.default_rating_weight);
        if !rating_weight.is_finite() || rating_weight < 0.0 {
            return Err(ServiceError::BadRequest("rating_weight must be a finite value >= 0".into()));
        }
        let text = req.merged_text()?;
        let image = req.image_id()?;
        if text.is_none() && image.is_none() {
            return Err(ServiceError::NoModality);
        }
        let image_bytes = match image {
            Some(id) => {
                let id: MediaId = id.parse().map_err(|_| ServiceError::UnknownMedia(id.to_string()))?;
                match self.media.get(id.as_str()) {
                    Ok((bytes, _)) => Some(bytes),
                    Err(_) => return Err(ServiceError::UnknownMedia(id.to_string())),
                }
            }
            None => None,
        };

        let kn = self.knowledge();
        let is_defect = |id: &str| kn.graph.node(id).is_some_and(|n| n.kind == NodeKind::Defect && !n.hidden);
        let mut degraded = false;
        let mut channels = Vec::new();
        let mut text_contexts: BTreeMap<String, Vec<u64>> = BTreeMap::new();

        if let Some(text) = text {
            let rewritten = self.providers.rewriter.rewrite(&text);
            degraded |= rewritten.degraded;
            let mut ranking = Vec::new();
            if !kn.index.is_empty() {
                match embed_text(self.embedder(), &rewritten.text) {
                    Ok(query) => {
                        let ranked = kn.index.top_k_vector(&query, kn.index.len(), rating_weight, kn.graph.as_ref())?;
                        for hit in collapse_by_node(&ranked, is_defect) {
                            ranking.push((hit.node_id.clone(), hit.score));
                            text_contexts.insert(hit.node_id, hit.context_ids);
                        }
                    }
                    Err(EmbedError::AllStopTokens) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            channels.push(Channel {
                name: TEXT_CHANNEL,
                ranking,
            });
        }

        if let Some(bytes) = image_bytes {
            let scored = match &self.providers.classifier {
                ClassifierBackend::Builtin(lock) => {
                    classify_image(&*lock.read().expect("classifier lock poisoned"), &bytes)
                }
                ClassifierBackend::Remote(remote) => classify_image(remote.as_ref(), &bytes),
            };
            let ranking = match scored {
                Ok(list) => list.into_iter().filter(|(label, _)| is_defect(label)).collect(),
                Err(ClassifyError::NoExemplars) => Vec::new(),
                Err(ClassifyError::Provider(_)) => {
                    degraded = true;
                    Vec::new()
                }
                Err(e) => return Err(ServiceError::BadRequest(e.to_string())),
            };
            channels.push(Channel {
                name: IMAGE_CHANNEL,
                ranking,
            });
        }

        let mut results = fuse(&channels, k);
        for result in &mut results {
            let texts = match text_contexts.get(&result.defect_id) {
                Some(ids) => ids
                    .iter()
                    .filter_map(|id| kn.index.get(*id))
                    .map(|c| c.text.clone())
                    .take(EVIDENCE_TEXTS)
                    .collect(),
                None => kn
                    .index
                    .contexts_for_node(&result.defect_id)
                    .map(|c| c.text.clone())
                    .take(EVIDENCE_TEXTS)
                    .collect(),
            };
            result.evidence.texts = texts;
            result.evidence.image_ids = image_ids(&kn.graph, &result.defect_id);
        }
        Ok(SearchOutcome { results, degraded })
    }

    pub fn start_session(&self, product_id: &str, operator_id: &str) -> Result<InspectionSession, ServiceError> {
        Ok(self.sessions.start_session(product_id, operator_id)?)
    }

    pub fn session(&self, session_id: &str) -> Result<InspectionSession, ServiceError> {
        Ok(self.sessions.get(session_id)?)
    }

    pub fn attach_defect(&self, session_id: &str, defect_id: &str) -> Result<InspectionSession, ServiceError> {
        let kn = self.knowledge();
        let ctx = Ctx { graph: &kn.graph, media: &self.media };
        Ok(self.sessions.attach_defect(&ctx, session_id, defect_id)?)
    }

    pub fn mark_assessed(&self, session_id: &str) -> Result<AssessmentGuide, ServiceError> {
        let kn = self.knowledge();
        let ctx = Ctx { graph: &kn.graph, media: &self.media };
        Ok(self.sessions.mark_assessed(&ctx, session_id)?)
    }

    pub fn log_measurement(
        &self,
        session_id: &str,
        metric: &str,
        value: f64,
        unit: &str,
        commentary_media_id: Option<&str>,
    ) -> Result<MeasurementRecord, ServiceError> {
        let kn = self.knowledge();
        let ctx = Ctx { graph: &kn.graph, media: &self.media };
        Ok(self
            .sessions
            .log_measurement(&ctx, session_id, metric, value, unit, commentary_media_id)?)
    }

    pub fn suggest(&self, session_id: &str) -> Result<Suggestion, ServiceError> {
        let kn = self.knowledge();
        Ok(self.sessions.evaluate_conformity(&kn.rules, session_id)?)
    }

    pub fn record_decision(
        &self,
        session_id: &str,
        decision: Decision,
        override_comment: Option<&str>,
    ) -> Result<InspectionSession, ServiceError> {
        Ok(self.sessions.record_decision(session_id, decision, override_comment)?)
    }

    /// Records a rating and makes the new aggregate visible to search.
    pub fn rate(&self, node_id: &str, operator_id: &str, score: i64) -> Result<RatingAggregate, ServiceError> {
        let _w = self.lock_writer();
        let mut next = (*self.knowledge()).clone();
        let aggregate = {
            let ctx = Ctx { graph: &next.graph, media: &self.media };
            self.sessions.rate_entry(&ctx, node_id, operator_id, score)?
        };
        Arc::make_mut(&mut next.graph).set_rating(node_id, Some(aggregate))?;
        self.publish(next);
        Ok(aggregate)
    }

    pub fn defect(&self, defect_id: &str) -> Result<DefectView, ServiceError> {
        let kn = self.knowledge();
        let defect = kn
            .graph
            .node(defect_id)
            .filter(|n| n.kind == NodeKind::Defect)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDefect(defect_id.to_string()))?;
        Ok(DefectView {
            neighbors: kn.graph.neighbors(defect_id, None, Direction::Both)?,
            contexts: kn
                .index
                .contexts_for_node(defect_id)
                .map(|c| ContextView {
                    context_id: c.context_id,
                    text: c.text.clone(),
                })
                .collect(),
            image_ids: image_ids(&kn.graph, defect_id),
            rules: kn.rules.rules_for(defect_id).cloned().collect(),
            defect,
        })
    }

    pub fn health(&self) -> Health {
        let kn = self.knowledge();
        Health {
            status: "ok".into(),
            embedder: self.embedder().name().to_string(),
            counts: Counts {
                nodes: kn.graph.node_count(),
                edges: kn.graph.edge_count(),
                contexts: kn.index.len(),
                media: self.media.len(),
                rules: kn.rules.len(),
                sessions: self.sessions.len(),
            },
        }
    }

    /// Runs a synthetic benchmark on a fresh index; service state is untouched.
    pub fn run_benchmark(&self, dataset: &str, seed: u64, ns: &[usize]) -> Result<BenchmarkReport, ServiceError> {
        if ns.is_empty() {
            return Err(ServiceError::BadRequest("ns must not be empty".into()));
        }
        Ok(run_named_benchmark(dataset, seed, self.embedder(), ns)?)
    }

    pub fn save_snapshot(&self) -> Result<Manifest, ServiceError> {
        let _w = self.lock_writer();
        let kn = self.knowledge();
        Ok(persist::save_snapshot(&self.config.data_dir, &kn.graph, &kn.index, &kn.rules)?)
    }

    /// Replaces in-memory knowledge with the snapshot on disk.
    pub fn load_snapshot(&self) -> Result<(), ServiceError> {
        let dir = persist::snapshot_dir(&self.config.data_dir);
        if !dir.exists() {
            return Err(SnapshotError::Corrupt(format!("no snapshot in {}", self.config.data_dir.display())).into());
        }
        {
            let _w = self.lock_writer();
            let knowledge = Self::read_knowledge(&self.config.data_dir, self.embedder())?;
            self.publish(knowledge);
        }
        self.apply_ratings();
        self.rebuild_classifier();
        Ok(())
    }

    /// References that fail to resolve: session commentary media and image
    /// nodes whose bytes are missing from the media store.
    pub fn dangling_references(&self) -> Vec<String> {
        let kn = self.knowledge();
        let mut out = Vec::new();
        for session in self.sessions.sessions() {
            for m in &session.measurements {
                if let Some(id) = &m.commentary_media_id {
                    if !self.media.contains(id) {
                        out.push(format!("{}: commentary {id}", session.session_id));
                    }
                }
            }
            if let Some(defect) = &session.defect_id {
                if !kn.graph.contains(defect) {
                    out.push(format!("{}: defect {defect}", session.session_id));
                }
            }
        }
        for image in kn.graph.nodes_of_kind(NodeKind::Image) {
            if !self.media.contains(&image.id) {
                out.push(format!("image node {}", image.id));
            }
        }
        out
    }
}
