//! Turning raw documents and the defects catalog into graph content.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{Action, CompareOp, ConformityRule, RuleBook, Threshold};
use crate::embed::{EmbedError, EmbeddingProvider, VectorIndex};
use crate::graph::{
    Graph, GraphError, NodeKind, PropValue, Props, Provenance, Triplet, BELONGS_TO, HAS_IMAGE,
    ORIGINATES_FROM,
};
use crate::media::{MediaError, MediaId, MediaStore};

pub trait ExtractorProvider: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, text: &str) -> Vec<Triplet>;
}

/// `(connector words, relation)` pairs recognized by [`PatternExtractor`].
const CONNECTORS: &[(&[&str], &str)] = &[
    (&["is", "an"], "is_an"),
    (&["is", "a"], "is_a"),
    (&["belongs", "to"], "belongs_to"),
    (&["originates", "from"], "originates_from"),
    (&["has"], "has"),
    (&["causes"], "causes"),
];

const ARTICLES: &[&str] = &["the", "a", "an"];

/// Rule-based extractor: one triplet per sentence of the form
/// `<subject> <connector> <object>`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PatternExtractor;

impl PatternExtractor {
    fn extract_sentence(sentence: &str) -> Option<Triplet> {
        let words: Vec<String> = sentence
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        for start in 1..words.len() {
            for (connector, relation) in CONNECTORS {
                let end = start + connector.len();
                if end < words.len() && words[start..end].iter().map(String::as_str).eq(connector.iter().copied()) {
                    let subject = strip_articles(&words[..start]);
                    let object = strip_articles(&words[end..]);
                    if subject.is_empty() || object.is_empty() {
                        return None;
                    }
                    return Triplet::new(&subject.join(" "), relation, &object.join(" ")).ok();
                }
            }
        }
        None
    }
}

fn strip_articles(words: &[String]) -> &[String] {
    let is_article = |w: &String| ARTICLES.contains(&w.as_str());
    let start = words.iter().position(|w| !is_article(w)).unwrap_or(words.len());
    let end = words.iter().rposition(|w| !is_article(w)).map_or(start, |i| i + 1);
    &words[start..end.max(start)]
}

impl ExtractorProvider for PatternExtractor {
    fn name(&self) -> &str {
        "pattern"
    }

    fn extract(&self, text: &str) -> Vec<Triplet> {
        text.split(['.', '!', '?'])
            .filter_map(Self::extract_sentence)
            .collect()
    }
}

pub fn extract_triplets(provider: &dyn ExtractorProvider, text: &str) -> Vec<Triplet> {
    provider.extract(text)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub nodes_created: usize,
    pub edges_created: usize,
    pub contexts_indexed: usize,
    pub media_stored: usize,
    pub triplets_extracted: usize,
    pub rules_registered: usize,
    pub warnings: Vec<String>,
}

impl IngestReport {
    pub fn merge(&mut self, other: IngestReport) {
        self.nodes_created += other.nodes_created;
        self.edges_created += other.edges_created;
        self.contexts_indexed += other.contexts_indexed;
        self.media_stored += other.media_stored;
        self.triplets_extracted += other.triplets_extracted;
        self.rules_registered += other.rules_registered;
        self.warnings.extend(other.warnings);
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("catalog parse error: {0}")]
    Parse(String),
    #[error("catalog io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Mutable views of the stores an ingestion job writes to.
pub struct KnowledgeStores<'a> {
    pub graph: &'a mut Graph,
    pub index: &'a mut VectorIndex,
    pub media: &'a MediaStore,
    pub rules: &'a mut RuleBook,
    pub embedder: &'a dyn EmbeddingProvider,
}

impl KnowledgeStores<'_> {
    fn upsert(&mut self, report: &mut IngestReport, id: &str, kind: NodeKind, props: Props) -> Result<(), GraphError> {
        if self.graph.upsert_node_tracked(id, kind, props)?.created {
            report.nodes_created += 1;
        }
        Ok(())
    }

    fn link(&mut self, report: &mut IngestReport, src: &str, rel: &str, dst: &str) -> Result<(), GraphError> {
        if self.graph.add_edge_tracked(src, rel, dst)?.created {
            report.edges_created += 1;
        }
        Ok(())
    }

    /// Indexes `text` on `node_id` unless that exact context already exists.
    fn index_once(&mut self, report: &mut IngestReport, node_id: &str, text: &str) -> Result<(), EmbedError> {
        if self.index.find(node_id, text).is_none() {
            self.index.index_context(self.graph, node_id, text, self.embedder)?;
            report.contexts_indexed += 1;
        }
        Ok(())
    }
}

/// Paragraphs (blank-line separated) with their char span in `text`.
pub fn paragraphs(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    let mut pos = 0usize;
    let mut flush = |current: &mut String, start: usize, end: usize| {
        let trimmed = current.trim();
        if !trimmed.is_empty() {
            out.push((start, end, trimmed.to_string()));
        }
        current.clear();
    };
    for line in text.split_inclusive('\n') {
        let len = line.chars().count();
        if line.trim().is_empty() {
            flush(&mut current, start, pos);
            start = pos + len;
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push_str(line);
        }
        pos += len;
    }
    flush(&mut current, start, pos);
    out
}

pub fn document_node_id(media_id: &MediaId) -> String {
    format!("doc:{media_id}")
}

/// Stores a document, extracts triplets per paragraph, and indexes each
/// paragraph as a context.
pub fn ingest_document(
    stores: &mut KnowledgeStores<'_>,
    doc_bytes: &[u8],
    mime: &str,
    extractor: &dyn ExtractorProvider,
) -> Result<IngestReport, ExtractError> {
    let mut report = IngestReport::default();
    let put = stores.media.put(doc_bytes, mime)?;
    if put.created {
        report.media_stored += 1;
    }
    let media_id = put.media_id;

    let essence = mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    if essence != "text/plain" {
        report
            .warnings
            .push(format!("{media_id}: stored without extraction (mime {mime} is not text/plain)"));
        return Ok(report);
    }
    let text = match std::str::from_utf8(doc_bytes) {
        Ok(text) => text,
        Err(e) => {
            report.warnings.push(format!("{media_id}: not valid UTF-8 ({e}); stored without extraction"));
            return Ok(report);
        }
    };

    for (start, end, paragraph) in paragraphs(text) {
        let provenance = Provenance {
            source_id: media_id.to_string(),
            start,
            end,
        };
        let mut subjects: Vec<(String, usize)> = Vec::new();
        for triplet in extractor.extract(&paragraph) {
            report.triplets_extracted += 1;
            let triplet = match Triplet::new(&triplet.subject, &triplet.relation, &triplet.object) {
                Ok(t) => t.with_provenance(provenance.clone()),
                Err(e) => {
                    report.warnings.push(format!("span {start}..{end}: dropped triplet ({e})"));
                    continue;
                }
            };
            let inserted = stores.graph.insert_triplet_tracked(&triplet)?;
            report.nodes_created += inserted.nodes_created;
            report.edges_created += usize::from(inserted.edge_created);
            let subject = inserted.value.0.id;
            match subjects.iter_mut().find(|(s, _)| *s == subject) {
                Some((_, n)) => *n += 1,
                None => subjects.push((subject, 1)),
            }
        }

        // Most frequent subject; earliest wins ties.
        let target = match subjects.iter().max_by(|a, b| a.1.cmp(&b.1).then(std::cmp::Ordering::Greater)) {
            Some((subject, _)) => subject.clone(),
            None => {
                let doc_node = document_node_id(&media_id);
                let props: Props = [("mime".to_string(), PropValue::from(essence.as_str()))].into();
                stores.upsert(&mut report, &doc_node, NodeKind::Generic, props)?;
                doc_node
            }
        };
        match stores.index_once(&mut report, &target, &paragraph) {
            Ok(()) => {}
            Err(e @ (EmbedError::AllStopTokens | EmbedError::EmptyText)) => {
                report.warnings.push(format!("span {start}..{end}: not indexed ({e})"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub defects: Vec<CatalogDefect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogDefect {
    pub id: String,
    pub name: String,
    pub category: String,
    #[serde(default)]
    pub machines: Vec<String>,
    pub descriptions: Vec<String>,
    /// Image file paths relative to the catalog file, or ids of media
    /// already in the store.
    #[serde(default)]
    pub images: Vec<String>,
    #[serde(default)]
    pub measurement_instruction: String,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub metric: String,
    pub op: CompareOp,
    pub threshold: Threshold,
    pub action: Action,
    pub priority: i64,
}

impl RuleSpec {
    pub fn to_rule(&self, defect_id: &str) -> ConformityRule {
        ConformityRule {
            rule_id: format!("{defect_id}#p{}", self.priority),
            defect_id: defect_id.to_string(),
            metric: self.metric.clone(),
            op: self.op,
            threshold: self.threshold,
            action: self.action,
            priority: self.priority,
        }
    }
}

impl Catalog {
    pub fn from_json(json: &str) -> Result<Self, ExtractError> {
        serde_json::from_str(json).map_err(|e| ExtractError::Parse(e.to_string()))
    }
}

pub const PROP_NAME: &str = "name";
pub const PROP_INSTRUCTION: &str = "measurement_instruction";

fn mime_for_path(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

enum ImageSource {
    Stored(MediaId),
    File(Vec<u8>, &'static str),
}

pub fn load_catalog(stores: &mut KnowledgeStores<'_>, catalog_file: &Path) -> Result<IngestReport, ExtractError> {
    let raw = fs::read_to_string(catalog_file).map_err(|source| ExtractError::Io {
        path: catalog_file.to_path_buf(),
        source,
    })?;
    let catalog = Catalog::from_json(&raw)?;
    let base = catalog_file.parent().unwrap_or_else(|| Path::new("."));
    ingest_catalog(stores, &catalog, Some(base))
}

/// Upserts every catalog entry. Entries that fail validation or reference
/// unreadable images are skipped with a warning; nothing of a skipped entry
/// is written.
///
/// Images are stored media ids or paths relative to `base_dir`. Without a
/// base directory only stored media ids are accepted.
pub fn ingest_catalog(
    stores: &mut KnowledgeStores<'_>,
    catalog: &Catalog,
    base_dir: Option<&Path>,
) -> Result<IngestReport, ExtractError> {
    let mut report = IngestReport::default();
    let mut seen = BTreeSet::new();
    for entry in &catalog.defects {
        if !seen.insert(entry.id.as_str()) {
            report.warnings.push(format!("{}: duplicate defect id, entry skipped", entry.id));
            continue;
        }
        if let Err(reason) = validate_entry(stores, entry) {
            report.warnings.push(format!("{}: {reason}, entry skipped", entry.id));
            continue;
        }
        let mut images = Vec::with_capacity(entry.images.len());
        let mut missing = None;
        for image in &entry.images {
            if let Ok(id) = image.parse::<MediaId>() {
                if stores.media.contains(id.as_str()) {
                    images.push(ImageSource::Stored(id));
                    continue;
                }
            }
            let Some(base) = base_dir else {
                missing = Some(format!("image `{image}` is not a stored media id"));
                break;
            };
            let path = base.join(image);
            match fs::read(&path) {
                Ok(bytes) => images.push(ImageSource::File(bytes, mime_for_path(&path))),
                Err(e) => {
                    missing = Some(format!("missing image file {} ({e})", path.display()));
                    break;
                }
            }
        }
        if let Some(reason) = missing {
            report.warnings.push(format!("{}: {reason}, entry skipped", entry.id));
            continue;
        }
        ingest_entry(stores, entry, images, &mut report)?;
    }
    Ok(report)
}

/// Checks everything that could fail midway, so an entry is applied fully or not at all.
fn validate_entry(stores: &KnowledgeStores<'_>, entry: &CatalogDefect) -> Result<(), String> {
    if entry.id.trim().is_empty() {
        return Err("empty defect id".into());
    }
    if entry.descriptions.iter().all(|d| d.trim().is_empty()) {
        return Err("no description".into());
    }
    let expect_kind = |id: &str, kind: NodeKind| match stores.graph.node(id) {
        Some(n) if n.kind != kind => Err(format!("node `{id}` exists as {}, expected {kind}", n.kind)),
        _ => Ok(()),
    };
    expect_kind(&entry.id, NodeKind::Defect)?;
    if entry.category.trim().is_empty() {
        return Err("empty category".into());
    }
    expect_kind(&entry.category, NodeKind::Category)?;
    for machine in &entry.machines {
        if machine.trim().is_empty() {
            return Err("empty machine name".into());
        }
        expect_kind(machine, NodeKind::Machine)?;
    }
    for description in &entry.descriptions {
        if let Err(e) = crate::embed::embed_text(stores.embedder, description) {
            if description.trim().is_empty() {
                continue;
            }
            return Err(format!("description {description:?} cannot be embedded ({e})"));
        }
    }
    let mut scratch = stores.rules.clone();
    for spec in &entry.rules {
        scratch
            .register(spec.to_rule(&entry.id))
            .map_err(|e| format!("invalid rule: {e}"))?;
    }
    Ok(())
}

fn ingest_entry(
    stores: &mut KnowledgeStores<'_>,
    entry: &CatalogDefect,
    images: Vec<ImageSource>,
    report: &mut IngestReport,
) -> Result<(), ExtractError> {
    let defect_props: Props = [
        (PROP_NAME.to_string(), PropValue::from(entry.name.as_str())),
        (PROP_INSTRUCTION.to_string(), PropValue::from(entry.measurement_instruction.as_str())),
    ]
    .into();
    stores.upsert(report, &entry.id, NodeKind::Defect, defect_props)?;

    let category_props: Props = [(PROP_NAME.to_string(), PropValue::from(entry.category.as_str()))].into();
    stores.upsert(report, &entry.category, NodeKind::Category, category_props)?;
    stores.link(report, &entry.id, BELONGS_TO, &entry.category)?;

    for machine in &entry.machines {
        let props: Props = [(PROP_NAME.to_string(), PropValue::from(machine.as_str()))].into();
        stores.upsert(report, machine, NodeKind::Machine, props)?;
        stores.link(report, &entry.id, ORIGINATES_FROM, machine)?;
    }

    for image in images {
        let media_id = match image {
            ImageSource::Stored(id) => id,
            ImageSource::File(bytes, mime) => {
                let put = stores.media.put(&bytes, mime)?;
                if put.created {
                    report.media_stored += 1;
                }
                put.media_id
            }
        };
        let mime = stores.media.stat(media_id.as_str())?.mime;
        let props: Props = [("mime".to_string(), PropValue::from(mime))].into();
        stores.upsert(report, media_id.as_str(), NodeKind::Image, props)?;
        stores.link(report, &entry.id, HAS_IMAGE, media_id.as_str())?;
    }

    for description in entry.descriptions.iter().filter(|d| !d.trim().is_empty()) {
        stores.index_once(report, &entry.id, description)?;
    }

    for spec in &entry.rules {
        let registered = stores
            .rules
            .register(spec.to_rule(&entry.id))
            .expect("rules validated before ingestion");
        report.rules_registered += usize::from(registered);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashedBagOfWords;
    use crate::graph::Direction;

    struct Fixture {
        graph: Graph,
        index: VectorIndex,
        media: MediaStore,
        rules: RuleBook,
        embedder: HashedBagOfWords,
    }

    impl Fixture {
        fn new() -> Self {
            let embedder = HashedBagOfWords::default();
            Self {
                graph: Graph::new(),
                index: VectorIndex::for_provider(&embedder),
                media: MediaStore::in_memory(),
                rules: RuleBook::new(),
                embedder,
            }
        }

        fn stores(&mut self) -> KnowledgeStores<'_> {
            KnowledgeStores {
                graph: &mut self.graph,
                index: &mut self.index,
                media: &self.media,
                rules: &mut self.rules,
                embedder: &self.embedder,
            }
        }
    }

    fn triple(t: &Triplet) -> (&str, &str, &str) {
        (&t.subject, &t.relation, &t.object)
    }

    #[test]
    fn pattern_extractor_examples() {
        let p = PatternExtractor;
        let out = extract_triplets(&p, "Stain belongs to surface defects.");
        assert_eq!(out.iter().map(triple).collect::<Vec<_>>(), [("stain", "belongs_to", "surface defects")]);

        let out = extract_triplets(&p, "The milling machine causes chatter marks.");
        assert_eq!(out.iter().map(triple).collect::<Vec<_>>(), [("milling machine", "causes", "chatter marks")]);

        assert!(extract_triplets(&p, "Hello world").is_empty());
        assert!(extract_triplets(&p, "").is_empty());
    }

    #[test]
    fn pattern_extractor_connectors() {
        let p = PatternExtractor;
        let out = p.extract("A burr is an edge defect! Porosity originates from the casting furnace? The plate has a dark stain.");
        assert_eq!(
            out.iter().map(triple).collect::<Vec<_>>(),
            [
                ("burr", "is_an", "edge defect"),
                ("porosity", "originates_from", "casting furnace"),
                ("plate", "has", "dark stain"),
            ]
        );
        // Connector at the start or the end leaves an empty phrase.
        assert!(p.extract("Has nothing.").is_empty());
        assert!(p.extract("The stain is a.").is_empty());
    }

    #[test]
    fn paragraph_spans() {
        let text = "First para.\nStill first.\n\n\nSecond.";
        let paras = paragraphs(text);
        assert_eq!(paras.len(), 2);
        assert_eq!(paras[0].2, "First para.\nStill first.");
        let chars: Vec<char> = text.chars().collect();
        let second: String = chars[paras[1].0..paras[1].1].iter().collect();
        assert_eq!(second, "Second.");
    }

    #[test]
    fn ingest_document_examples() {
        let mut fx = Fixture::new();
        let doc = b"Stain belongs to surface defects. The milling machine causes chatter marks.\n\nOperators should wipe the plate first";
        let first = ingest_document(&mut fx.stores(), doc, "text/plain; charset=utf-8", &PatternExtractor).unwrap();
        assert_eq!(first.triplets_extracted, 2);
        assert_eq!(first.media_stored, 1);
        assert_eq!(first.contexts_indexed, 2);
        assert!(first.warnings.is_empty());

        let graph_before = fx.graph.clone();
        let index_len = fx.index.len();
        let second = ingest_document(&mut fx.stores(), doc, "text/plain", &PatternExtractor).unwrap();
        assert_eq!(second.media_stored, 0);
        assert_eq!(second.nodes_created, 0);
        assert_eq!(second.edges_created, 0);
        assert_eq!(second.contexts_indexed, 0);
        assert_eq!(fx.graph, graph_before);
        assert_eq!(fx.index.len(), index_len);
        assert_eq!(fx.media.len(), 1);

        // Provenance resolves to the stored document.
        for edge in fx.graph.edges() {
            for p in fx.graph.provenance_of(&edge) {
                assert!(fx.media.contains(&p.source_id));
            }
        }
        // The unmatched paragraph lands on the document node.
        let doc_id = crate::media::content_hash(doc);
        assert_eq!(fx.index.contexts_for_node(&document_node_id(&doc_id)).count(), 1);
    }

    #[test]
    fn ingest_non_text_document() {
        let mut fx = Fixture::new();
        let report = ingest_document(&mut fx.stores(), b"\x89PNG....", "image/png", &PatternExtractor).unwrap();
        assert_eq!(report.media_stored, 1);
        assert_eq!(report.triplets_extracted, 0);
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(fx.graph.node_count(), 0);
    }

    fn entry(id: &str, machines: &[&str], images: &[&str]) -> CatalogDefect {
        CatalogDefect {
            id: id.into(),
            name: id.to_uppercase(),
            category: "surface".into(),
            machines: machines.iter().map(|s| s.to_string()).collect(),
            descriptions: vec![
                format!("{id} looks like a dark mark"),
                format!("{id} has a round shape"),
                format!("{id} appears near the edge"),
            ],
            images: images.iter().map(|s| s.to_string()).collect(),
            measurement_instruction: "Measure the depth".into(),
            rules: vec![RuleSpec {
                metric: "depth".into(),
                op: CompareOp::Le,
                threshold: Threshold::Single(0.2),
                action: Action::Conform,
                priority: 1,
            }],
        }
    }

    #[test]
    fn catalog_counts_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), b"image-a").unwrap();
        std::fs::write(dir.path().join("b.png"), b"image-b").unwrap();
        let catalog = Catalog {
            defects: vec![
                entry("stain", &["mill", "saw"], &["a.png", "b.png"]),
                entry("dent", &["mill"], &["a.png"]),
            ],
        };
        let path = dir.path().join("catalog.json");
        std::fs::write(&path, serde_json::to_string(&catalog).unwrap()).unwrap();

        let mut fx = Fixture::new();
        let report = load_catalog(&mut fx.stores(), &path).unwrap();
        assert_eq!(report.contexts_indexed, 6);
        assert_eq!(report.media_stored, 2);
        assert_eq!(report.rules_registered, 2);
        // stain, dent, surface, mill, saw, 2 images
        assert_eq!(report.nodes_created, 7);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);

        let machines = fx.graph.neighbors("stain", Some(ORIGINATES_FROM), Direction::Out).unwrap();
        assert_eq!(machines.len(), 2);
        let images = fx.graph.neighbors("stain", Some(HAS_IMAGE), Direction::Out).unwrap();
        assert!(images.iter().all(|n| n.kind == NodeKind::Image && fx.media.contains(&n.id)));
        assert_eq!(fx.index.contexts_for_node("stain").count(), 3);
        assert!(fx.graph.validate_ontology(&Default::default()).is_empty());

        let again = load_catalog(&mut fx.stores(), &path).unwrap();
        assert_eq!(again, IngestReport::default());
    }

    #[test]
    fn catalog_entry_with_missing_image_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let catalog = Catalog {
            defects: vec![entry("stain", &[], &["nope.png"]), entry("dent", &[], &[])],
        };
        let mut fx = Fixture::new();
        let report = ingest_catalog(&mut fx.stores(), &catalog, Some(dir.path())).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("missing image"));
        assert!(!fx.graph.contains("stain"));
        assert!(fx.graph.contains("dent"));
    }

    #[test]
    fn catalog_images_may_reference_stored_media() {
        let mut fx = Fixture::new();
        let id = fx.media.put(b"uploaded", "image/jpeg").unwrap().media_id;
        let catalog = Catalog {
            defects: vec![entry("stain", &[], &[id.as_str()])],
        };
        let report = ingest_catalog(&mut fx.stores(), &catalog, None).unwrap();
        assert_eq!(report.media_stored, 0);
        assert!(fx.graph.has_edge("stain", HAS_IMAGE, id.as_str()));
    }

    #[test]
    fn catalog_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"defects\": [ {").unwrap();
        let mut fx = Fixture::new();
        assert!(matches!(load_catalog(&mut fx.stores(), &path), Err(ExtractError::Parse(_))));
    }

    #[test]
    fn conflicting_kinds_skip_the_entry() {
        let mut fx = Fixture::new();
        fx.graph.upsert_node("surface", NodeKind::Machine, Props::new()).unwrap();
        let catalog = Catalog {
            defects: vec![entry("stain", &[], &[])],
        };
        let report = ingest_catalog(&mut fx.stores(), &catalog, None).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(!fx.graph.contains("stain"));
        assert_eq!(fx.index.len(), 0);
    }
}
