//! Text embeddings and the exact cosine-similarity context index.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

/// Dimension of the built-in hashed bag-of-words provider.
pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("text is empty")]
    EmptyText,
    #[error("no token survived tokenization")]
    AllStopTokens,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("vector is all zeros")]
    ZeroVector,
    #[error("vector contains a non-finite value")]
    NonFinite,
    #[error("vector has no components")]
    EmptyVector,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("malformed index snapshot: {0}")]
    Snapshot(String),
}

/// A finite, non-zero vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    #[serde(skip)]
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(EmbedError::ZeroVector);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { values, norm })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, EmbedError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    // Subnormal inputs can underflow the norm product even though no component is zero.
    if denom == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

/// Embeds `text`, checking the provider honoured its declared dimension.
pub fn embed_text(provider: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let vector = provider.embed(text)?;
    if vector.dim() != provider.dim() {
        return Err(EmbedError::DimMismatch {
            expected: provider.dim(),
            actual: vector.dim(),
        });
    }
    Ok(vector)
}

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Hashed bag-of-words: token counts bucketed by FNV-1a, then L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBagOfWords {
    dim: usize,
    name: String,
}

impl HashedBagOfWords {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            name: format!("hashed-bow-fnv1a-{dim}"),
        }
    }
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashedBagOfWords {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut counts = vec![0.0; self.dim];
        let mut seen = false;
        for token in tokenize(text) {
            counts[(fnv1a(token.as_bytes()) % self.dim as u64) as usize] += 1.0;
            seen = true;
        }
        if !seen {
            return Err(EmbedError::AllStopTokens);
        }
        let norm = counts.iter().map(|c: &f64| c * c).sum::<f64>().sqrt();
        for c in &mut counts {
            *c /= norm;
        }
        EmbeddingVector::new(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexedContext {
    pub context_id: u64,
    pub node_id: String,
    pub text: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredContext {
    pub context_id: u64,
    pub node_id: String,
    pub score: f64,
}

/// Supplies node rating means for the rating boost.
pub trait RatingSource {
    fn rating_mean(&self, node_id: &str) -> Option<f64>;
}

impl RatingSource for Graph {
    fn rating_mean(&self, node_id: &str) -> Option<f64> {
        self.node(node_id).and_then(|n| n.rating).map(|r| r.mean)
    }
}

/// No ratings at all.
pub struct Unrated;

impl RatingSource for Unrated {
    fn rating_mean(&self, _node_id: &str) -> Option<f64> {
        None
    }
}

/// Rating boost mapped from the 1..5 scale onto [-1, 1].
pub fn rating_boost(mean: Option<f64>) -> f64 {
    mean.map_or(0.0, |m| (m - 3.0) / 2.0)
}

/// Descending score, then ascending context id.
pub fn rank_order(a: &ScoredContext, b: &ScoredContext) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.context_id.cmp(&b.context_id))
}

/// Exact (linear scan) vector index over text contexts.
///
/// Contexts are held behind `Arc` so cloning the index to publish a new
/// snapshot only copies pointers.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    provider_name: String,
    next_id: u64,
    contexts: Vec<Arc<IndexedContext>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    dim: usize,
    count: usize,
    provider_name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotLine {
    context_id: u64,
    node_id: String,
    text: String,
    values: Vec<f64>,
}

impl VectorIndex {
    pub fn new(dim: usize, provider_name: impl Into<String>) -> Self {
        Self {
            dim,
            provider_name: provider_name.into(),
            next_id: 1,
            contexts: Vec::new(),
        }
    }

    pub fn for_provider(provider: &dyn EmbeddingProvider) -> Self {
        Self::new(provider.dim(), provider.name())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_name(&self) -> &str {
        &self.provider_name
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn contexts(&self) -> impl Iterator<Item = &IndexedContext> {
        self.contexts.iter().map(Arc::as_ref)
    }

    pub fn get(&self, context_id: u64) -> Option<&IndexedContext> {
        // Ids are assigned in increasing order, so the vector is sorted by id.
        self.contexts
            .binary_search_by_key(&context_id, |c| c.context_id)
            .ok()
            .map(|i| self.contexts[i].as_ref())
    }

    pub fn contexts_for_node<'a>(&'a self, node_id: &'a str) -> impl Iterator<Item = &'a IndexedContext> + 'a {
        self.contexts().filter(move |c| c.node_id == node_id)
    }

    pub fn find(&self, node_id: &str, text: &str) -> Option<&IndexedContext> {
        self.contexts().find(|c| c.node_id == node_id && c.text == text)
    }

    /// Embeds `text` and stores it as a context of `node_id`.
    pub fn index_context(
        &mut self,
        graph: &Graph,
        node_id: &str,
        text: &str,
        provider: &dyn EmbeddingProvider,
    ) -> Result<u64, EmbedError> {
        if !graph.contains(node_id) {
            return Err(EmbedError::UnknownNode(node_id.to_string()));
        }
        if provider.dim() != self.dim {
            return Err(EmbedError::DimMismatch {
                expected: self.dim,
                actual: provider.dim(),
            });
        }
        let vector = embed_text(provider, text)?;
        self.insert_vector(node_id, text, vector)
    }

    /// Stores a precomputed vector. Node existence is the caller's concern.
    pub fn insert_vector(&mut self, node_id: &str, text: &str, vector: EmbeddingVector) -> Result<u64, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        if vector.dim() != self.dim {
            return Err(EmbedError::DimMismatch {
                expected: self.dim,
                actual: vector.dim(),
            });
        }
        let context_id = self.next_id;
        self.next_id += 1;
        self.contexts.push(Arc::new(IndexedContext {
            context_id,
            node_id: node_id.to_string(),
            text: text.to_string(),
            vector,
        }));
        Ok(context_id)
    }

    fn score(&self, ctx: &IndexedContext, query: &EmbeddingVector, rating_weight: f64, ratings: &dyn RatingSource) -> Result<f64, EmbedError> {
        let cosine = cosine_similarity(query, &ctx.vector)?;
        if rating_weight == 0.0 {
            return Ok(cosine);
        }
        Ok(cosine + rating_weight * rating_boost(ratings.rating_mean(&ctx.node_id)))
    }

    /// Top-`k` contexts for a query vector using a bounded heap.
    pub fn top_k_vector(
        &self,
        query: &EmbeddingVector,
        k: usize,
        rating_weight: f64,
        ratings: &dyn RatingSource,
    ) -> Result<Vec<ScoredContext>, EmbedError> {
        if query.dim() != self.dim {
            return Err(EmbedError::DimMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        // Min-heap on rank order: the root is the worst of the current best k.
        let mut heap: BinaryHeap<Reverse<HeapEntry>> = BinaryHeap::with_capacity(k + 1);
        for ctx in &self.contexts {
            let entry = HeapEntry(ScoredContext {
                context_id: ctx.context_id,
                node_id: String::new(),
                score: self.score(ctx, query, rating_weight, ratings)?,
            });
            if heap.len() < k {
                heap.push(Reverse(entry));
            } else if let Some(worst) = heap.peek() {
                if entry > worst.0 {
                    heap.pop();
                    heap.push(Reverse(entry));
                }
            }
        }
        let mut out: Vec<ScoredContext> = heap.into_iter().map(|Reverse(e)| e.0).collect();
        out.sort_by(rank_order);
        for hit in &mut out {
            hit.node_id = self.get(hit.context_id).expect("hit comes from index").node_id.clone();
        }
        Ok(out)
    }

    pub fn query_top_k(
        &self,
        query_text: &str,
        k: usize,
        provider: &dyn EmbeddingProvider,
        rating_weight: f64,
        ratings: &dyn RatingSource,
    ) -> Result<Vec<ScoredContext>, EmbedError> {
        let query = embed_text(provider, query_text)?;
        self.top_k_vector(&query, k, rating_weight, ratings)
    }

    /// Scores every context and fully sorts them. Reference ranking for tests
    /// and benchmarks.
    pub fn brute_force_rank(&self, query: &EmbeddingVector) -> Result<Vec<ScoredContext>, EmbedError> {
        self.brute_force_rank_rated(query, 0.0, &Unrated)
    }

    pub fn brute_force_rank_rated(
        &self,
        query: &EmbeddingVector,
        rating_weight: f64,
        ratings: &dyn RatingSource,
    ) -> Result<Vec<ScoredContext>, EmbedError> {
        if self.contexts.is_empty() {
            return Err(EmbedError::EmptyIndex);
        }
        let mut all = self
            .contexts
            .iter()
            .map(|ctx| {
                Ok(ScoredContext {
                    context_id: ctx.context_id,
                    node_id: ctx.node_id.clone(),
                    score: self.score(ctx, query, rating_weight, ratings)?,
                })
            })
            .collect::<Result<Vec<_>, EmbedError>>()?;
        all.sort_by(rank_order);
        Ok(all)
    }

    /// Writes the header line followed by one JSON line per context.
    pub fn write_snapshot(&self, mut out: impl Write) -> std::io::Result<()> {
        let header = SnapshotHeader {
            dim: self.dim,
            count: self.contexts.len(),
            provider_name: self.provider_name.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for ctx in &self.contexts {
            let line = SnapshotLine {
                context_id: ctx.context_id,
                node_id: ctx.node_id.clone(),
                text: ctx.text.clone(),
                values: ctx.vector.values.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_snapshot(input: impl BufRead) -> Result<Self, EmbedError> {
        let bad = |e: &dyn std::fmt::Display| EmbedError::Snapshot(e.to_string());
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| EmbedError::Snapshot("missing header".into()))?
            .map_err(|e| bad(&e))?;
        let header: SnapshotHeader = serde_json::from_str(&header_line).map_err(|e| bad(&e))?;
        let mut index = VectorIndex::new(header.dim, header.provider_name);
        for line in lines {
            let line = line.map_err(|e| bad(&e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SnapshotLine = serde_json::from_str(&line).map_err(|e| bad(&e))?;
            if rec.context_id < index.next_id {
                return Err(EmbedError::Snapshot(format!(
                    "context ids not strictly increasing at {}",
                    rec.context_id
                )));
            }
            index.next_id = rec.context_id;
            index.insert_vector(&rec.node_id, &rec.text, EmbeddingVector::new(rec.values)?)?;
        }
        if index.len() != header.count {
            return Err(EmbedError::Snapshot(format!(
                "header announces {} contexts, found {}",
                header.count,
                index.len()
            )));
        }
        Ok(index)
    }
}

#[derive(Debug)]
struct HeapEntry(ScoredContext);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    /// Greater means ranked earlier.
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&other.0, &self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeKind, Props, RatingAggregate};
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    fn graph_with(ids: &[&str]) -> Graph {
        let mut g = Graph::new();
        for id in ids {
            g.upsert_node(id, NodeKind::Defect, Props::new()).unwrap();
        }
        g
    }

    #[test]
    fn vector_validation() {
        assert_eq!(EmbeddingVector::new(vec![0.0, 0.0]), Err(EmbedError::ZeroVector));
        assert_eq!(EmbeddingVector::new(vec![f64::NAN, 1.0]), Err(EmbedError::NonFinite));
        assert_eq!(EmbeddingVector::new(vec![]), Err(EmbedError::EmptyVector));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap(), -1.0);
        // 1 / (1 * sqrt 2)
        let expected = 1.0 / 2f64.sqrt();
        assert!((cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap() - 0.7071067811865475).abs() < 1e-12);
        assert!((expected - 0.7071067811865475f64).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(EmbedError::DimMismatch { .. })
        ));
    }

    #[test]
    fn fnv1a_reference_values() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn default_provider_behaviour() {
        let p = HashedBagOfWords::default();
        assert_eq!(p.dim(), 256);
        let a = embed_text(&p, "stain").unwrap();
        assert_eq!(a, embed_text(&p, "stain").unwrap());
        let doubled = embed_text(&p, "stain stain").unwrap();
        assert!((cosine_similarity(&a, &doubled).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(embed_text(&p, "dark stain").unwrap(), embed_text(&p, "stain dark").unwrap());
        assert_eq!(embed_text(&p, "Dark STAIN").unwrap(), embed_text(&p, "dark stain").unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(embed_text(&p, "   "), Err(EmbedError::EmptyText));
        assert_eq!(embed_text(&p, "?!..."), Err(EmbedError::AllStopTokens));
    }

    #[test]
    fn bucket_assignment_matches_fnv() {
        let p = HashedBagOfWords::default();
        let vec = p.embed("stain").unwrap();
        let bucket = (fnv1a(b"stain") % 256) as usize;
        assert_eq!(vec.values()[bucket], 1.0);
        assert_eq!(vec.values().iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn context_ids_are_monotone() {
        let p = HashedBagOfWords::default();
        let g = graph_with(&["stain"]);
        let mut idx = VectorIndex::for_provider(&p);
        assert_eq!(idx.index_context(&g, "stain", "dark round mark", &p).unwrap(), 1);
        assert_eq!(idx.index_context(&g, "stain", "oily residue", &p).unwrap(), 2);
        assert_eq!(
            idx.index_context(&g, "ghost", "text", &p),
            Err(EmbedError::UnknownNode("ghost".into()))
        );
        assert_eq!(idx.index_context(&g, "stain", "  ", &p), Err(EmbedError::EmptyText));
        let small = HashedBagOfWords::new(8);
        assert!(matches!(
            idx.index_context(&g, "stain", "x", &small),
            Err(EmbedError::DimMismatch { .. })
        ));
    }

    #[test]
    fn query_examples() {
        let p = HashedBagOfWords::default();
        let g = graph_with(&["stain"]);
        let mut idx = VectorIndex::for_provider(&p);
        idx.index_context(&g, "stain", "red stain", &p).unwrap();
        assert!(idx.query_top_k("red stain", 0, &p, 0.0, &g).unwrap().is_empty());
        let hits = idx.query_top_k("red stain", 5, &p, 0.0, &g).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].node_id, "stain");
        assert!((hits[0].score - 1.0).abs() < 1e-12);
        assert_eq!(idx.query_top_k("", 5, &p, 0.0, &g), Err(EmbedError::EmptyText));
    }

    #[test]
    fn brute_force_ties_by_context_id() {
        let idx = {
            let mut idx = VectorIndex::new(2, "manual");
            idx.insert_vector("b", "one", v(&[1.0, 0.0])).unwrap();
            idx.insert_vector("a", "two", v(&[2.0, 0.0])).unwrap();
            idx.insert_vector("c", "three", v(&[0.0, 1.0])).unwrap();
            idx
        };
        let ranked = idx.brute_force_rank(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(ranked.len(), 3);
        let ids: Vec<_> = ranked.iter().map(|r| r.context_id).collect();
        assert_eq!(ids, [1, 2, 3]);
        assert_eq!(
            VectorIndex::new(2, "x").brute_force_rank(&v(&[1.0, 0.0])),
            Err(EmbedError::EmptyIndex)
        );
    }

    #[test]
    fn rating_boost_reorders_when_enabled() {
        let mut g = graph_with(&["a", "b"]);
        g.set_rating("b", Some(RatingAggregate { mean: 5.0, count: 1 })).unwrap();
        let mut idx = VectorIndex::new(2, "manual");
        idx.insert_vector("a", "a", v(&[1.0, 0.0])).unwrap();
        idx.insert_vector("b", "b", v(&[1.0, 0.2])).unwrap();
        let q = v(&[1.0, 0.0]);
        let plain = idx.top_k_vector(&q, 2, 0.0, &g).unwrap();
        assert_eq!(plain[0].node_id, "a");
        let boosted = idx.top_k_vector(&q, 2, 0.5, &g).unwrap();
        assert_eq!(boosted[0].node_id, "b");
        let expected = cosine_similarity(&q, &v(&[1.0, 0.2])).unwrap() + 0.5;
        assert_eq!(boosted[0].score, expected);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let p = HashedBagOfWords::default();
        let g = graph_with(&["a", "b"]);
        let mut idx = VectorIndex::for_provider(&p);
        idx.index_context(&g, "a", "deep scratch along the edge", &p).unwrap();
        idx.index_context(&g, "b", "dark stain, oily", &p).unwrap();
        idx.insert_vector("b", "odd floats", v(&vec![0.1 + 0.2; 256])).unwrap();
        let mut buf = Vec::new();
        idx.write_snapshot(&mut buf).unwrap();
        let back = VectorIndex::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, idx);

        let mut more = back.clone();
        assert_eq!(more.insert_vector("a", "next", v(&vec![1.0; 256])).unwrap(), 4);
    }

    #[test]
    fn snapshot_count_mismatch_is_rejected() {
        let raw = "{\"dim\":2,\"count\":2,\"provider_name\":\"m\"}\n{\"context_id\":1,\"node_id\":\"a\",\"text\":\"t\",\"values\":[1.0,0.0]}\n";
        assert!(matches!(VectorIndex::read_snapshot(raw.as_bytes()), Err(EmbedError::Snapshot(_))));
    }

    fn vector_strategy(dim: usize) -> impl Strategy<Value = EmbeddingVector> {
        proptest::collection::vec(-100.0f64..100.0, dim)
            .prop_filter_map("non-zero", |vals| EmbeddingVector::new(vals).ok())
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_bounded(a in vector_strategy(8), b in vector_strategy(8)) {
            let ab = cosine_similarity(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn top_k_is_monotone_in_k(vectors in proptest::collection::vec(vector_strategy(4), 1..30), q in vector_strategy(4), k in 0usize..30) {
            let mut idx = VectorIndex::new(4, "manual");
            for (i, vec) in vectors.into_iter().enumerate() {
                idx.insert_vector(&format!("n{}", i % 5), "t", vec).unwrap();
            }
            let small = idx.top_k_vector(&q, k, 0.0, &Unrated).unwrap();
            let large = idx.top_k_vector(&q, k + 1, 0.0, &Unrated).unwrap();
            prop_assert_eq!(&large[..small.len()], &small[..]);
            let full = idx.brute_force_rank(&q).unwrap();
            prop_assert_eq!(&full[..small.len()], &small[..]);
        }
    }
}
