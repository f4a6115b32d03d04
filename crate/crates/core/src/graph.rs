//! In-process property graph for the defect knowledge base.
//!
//! Nodes are typed by [`NodeKind`]; edges are `(src, rel, dst)` triples kept
//! unique. Typed edges are checked against an [`OntologySchema`], while nodes
//! created from free-text triplets land as [`NodeKind::Generic`] and are exempt
//! from schema validation.
//!
//! The graph itself is a plain value. Callers that share it between threads
//! wrap it in a `RwLock`, which gives the single-writer/multi-reader contract:
//! every mutating method takes `&mut self` and leaves the graph consistent
//! before returning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BELONGS_TO: &str = "belongs_to";
pub const ORIGINATES_FROM: &str = "originates_from";
pub const HAS_IMAGE: &str = "has_image";
pub const HAS_DESCRIPTION: &str = "has_description";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Defect,
    Category,
    Machine,
    Image,
    Description,
    Generic,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Scalar property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Bool(bool),
    Number(f64),
    String(String),
}

impl From<&str> for PropValue {
    fn from(value: &str) -> Self {
        PropValue::String(value.to_string())
    }
}

impl From<String> for PropValue {
    fn from(value: String) -> Self {
        PropValue::String(value)
    }
}

impl From<f64> for PropValue {
    fn from(value: f64) -> Self {
        PropValue::Number(value)
    }
}

impl From<bool> for PropValue {
    fn from(value: bool) -> Self {
        PropValue::Bool(value)
    }
}

impl PropValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropValue::String(s) => Some(s),
            _ => None,
        }
    }
}

pub type Props = BTreeMap<String, PropValue>;

/// Aggregate of operator ratings on a node. Only exists once `count > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingAggregate {
    pub mean: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub props: Props,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<RatingAggregate>,
    /// Tombstone: hidden nodes stay in the graph but are skipped by traversal.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hidden: bool,
}

impl GraphNode {
    pub fn prop_str(&self, key: &str) -> Option<&str> {
        self.props.get(key).and_then(PropValue::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: String,
    pub rel: String,
    pub dst: String,
}

/// Where a triplet came from: a stored media object and a char span in it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub relation: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Triplet {
    /// Builds a triplet with trimmed fields and a normalized relation.
    pub fn new(subject: &str, relation: &str, object: &str) -> Result<Self, GraphError> {
        let subject = subject.trim();
        let object = object.trim();
        let relation = normalize_relation(relation);
        if subject.is_empty() || relation.is_empty() || object.is_empty() {
            return Err(GraphError::EmptyField);
        }
        Ok(Self {
            subject: subject.to_string(),
            relation,
            object: object.to_string(),
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }
}

/// Lowercases and joins whitespace runs with a single underscore.
pub fn normalize_relation(relation: &str) -> String {
    relation
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologySchema {
    pub allowed: BTreeSet<(NodeKind, String, NodeKind)>,
}

impl OntologySchema {
    pub fn permits(&self, src: NodeKind, rel: &str, dst: NodeKind) -> bool {
        self.allowed.contains(&(src, rel.to_string(), dst))
    }
}

impl Default for OntologySchema {
    fn default() -> Self {
        let allowed = [
            (NodeKind::Defect, BELONGS_TO, NodeKind::Category),
            (NodeKind::Defect, ORIGINATES_FROM, NodeKind::Machine),
            (NodeKind::Defect, HAS_IMAGE, NodeKind::Image),
            (NodeKind::Defect, HAS_DESCRIPTION, NodeKind::Description),
        ]
        .into_iter()
        .map(|(s, r, d)| (s, r.to_string(), d))
        .collect();
        Self { allowed }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub edge: GraphEdge,
    pub src_kind: NodeKind,
    pub dst_kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node id must not be empty")]
    EmptyId,
    #[error("node `{id}` already exists as {existing}, cannot become {requested}")]
    KindConflict {
        id: String,
        existing: NodeKind,
        requested: NodeKind,
    },
    #[error("edge endpoint `{0}` does not exist")]
    MissingEndpoint(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("triplet subject, relation and object must be nonempty")]
    EmptyField,
    #[error("relation label must not be empty")]
    EmptyRelation,
    #[error("malformed graph snapshot: {0}")]
    Snapshot(String),
}

/// Serialized form of the graph: `{nodes: [...], edges: [...]}`, both sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<SnapshotEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEdge {
    pub src: String,
    pub rel: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Graph {
    nodes: BTreeMap<String, GraphNode>,
    out_edges: BTreeSet<(String, String, String)>,
    // (dst, rel, src) mirror of `out_edges` for inbound traversal.
    in_edges: BTreeSet<(String, String, String)>,
    provenance: BTreeMap<GraphEdge, BTreeSet<Provenance>>,
}

/// Outcome of an insertion: the stored value and whether it was new.
#[derive(Debug, Clone, PartialEq)]
pub struct Upserted<T> {
    pub value: T,
    pub created: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.len()
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }

    pub fn edges(&self) -> impl Iterator<Item = GraphEdge> + '_ {
        self.out_edges.iter().map(|(s, r, d)| GraphEdge {
            src: s.clone(),
            rel: r.clone(),
            dst: d.clone(),
        })
    }

    pub fn has_edge(&self, src: &str, rel: &str, dst: &str) -> bool {
        self.out_edges
            .contains(&(src.to_string(), rel.to_string(), dst.to_string()))
    }

    pub fn provenance_of(&self, edge: &GraphEdge) -> impl Iterator<Item = &Provenance> {
        self.provenance.get(edge).into_iter().flatten()
    }

    pub fn upsert_node(&mut self, id: &str, kind: NodeKind, props: Props) -> Result<GraphNode, GraphError> {
        self.upsert_node_tracked(id, kind, props).map(|u| u.value)
    }

    /// Like [`Graph::upsert_node`] but reports whether the node was created.
    pub fn upsert_node_tracked(
        &mut self,
        id: &str,
        kind: NodeKind,
        props: Props,
    ) -> Result<Upserted<GraphNode>, GraphError> {
        if id.is_empty() {
            return Err(GraphError::EmptyId);
        }
        match self.nodes.get_mut(id) {
            Some(existing) => {
                if existing.kind != kind {
                    return Err(GraphError::KindConflict {
                        id: id.to_string(),
                        existing: existing.kind,
                        requested: kind,
                    });
                }
                existing.props.extend(props);
                Ok(Upserted {
                    value: existing.clone(),
                    created: false,
                })
            }
            None => {
                let node = GraphNode {
                    id: id.to_string(),
                    kind,
                    props,
                    rating: None,
                    hidden: false,
                };
                self.nodes.insert(id.to_string(), node.clone());
                Ok(Upserted {
                    value: node,
                    created: true,
                })
            }
        }
    }

    pub fn add_edge(&mut self, src: &str, rel: &str, dst: &str) -> Result<GraphEdge, GraphError> {
        self.add_edge_tracked(src, rel, dst).map(|u| u.value)
    }

    pub fn add_edge_tracked(&mut self, src: &str, rel: &str, dst: &str) -> Result<Upserted<GraphEdge>, GraphError> {
        for endpoint in [src, dst] {
            if !self.nodes.contains_key(endpoint) {
                return Err(GraphError::MissingEndpoint(endpoint.to_string()));
            }
        }
        if rel.is_empty() {
            return Err(GraphError::EmptyRelation);
        }
        let created = self
            .out_edges
            .insert((src.to_string(), rel.to_string(), dst.to_string()));
        if created {
            self.in_edges
                .insert((dst.to_string(), rel.to_string(), src.to_string()));
        }
        Ok(Upserted {
            value: GraphEdge {
                src: src.to_string(),
                rel: rel.to_string(),
                dst: dst.to_string(),
            },
            created,
        })
    }

    /// Nodes adjacent to `id` through edges matching `rel_filter`, sorted by id.
    /// Hidden nodes are skipped.
    pub fn neighbors(&self, id: &str, rel_filter: Option<&str>, direction: Direction) -> Result<Vec<GraphNode>, GraphError> {
        if !self.nodes.contains_key(id) {
            return Err(GraphError::UnknownNode(id.to_string()));
        }
        let mut ids = BTreeSet::new();
        if matches!(direction, Direction::Out | Direction::Both) {
            collect_adjacent(&self.out_edges, id, rel_filter, &mut ids);
        }
        if matches!(direction, Direction::In | Direction::Both) {
            collect_adjacent(&self.in_edges, id, rel_filter, &mut ids);
        }
        Ok(ids
            .into_iter()
            .filter_map(|n| self.nodes.get(n))
            .filter(|n| !n.hidden)
            .cloned()
            .collect())
    }

    pub fn insert_triplet(&mut self, triplet: &Triplet) -> Result<(GraphNode, GraphEdge, GraphNode), GraphError> {
        self.insert_triplet_tracked(triplet).map(|t| t.value)
    }

    /// Inserts a triplet, reporting how many nodes and edges were new.
    pub fn insert_triplet_tracked(
        &mut self,
        triplet: &Triplet,
    ) -> Result<TripletInsert, GraphError> {
        // Re-validate: the fields are public and may not have gone through `Triplet::new`.
        let mut normalized = Triplet::new(&triplet.subject, &triplet.relation, &triplet.object)?;
        normalized.provenance = triplet.provenance.clone();

        let mut nodes_created = 0;
        let mut endpoint = |graph: &mut Graph, id: &str| -> Result<GraphNode, GraphError> {
            match graph.nodes.get(id) {
                Some(existing) => Ok(existing.clone()),
                None => {
                    nodes_created += 1;
                    graph.upsert_node(id, NodeKind::Generic, Props::new())
                }
            }
        };
        let subject = endpoint(self, &normalized.subject)?;
        let object = endpoint(self, &normalized.object)?;
        let edge = self.add_edge_tracked(&subject.id, &normalized.relation, &object.id)?;
        if let Some(p) = normalized.provenance {
            self.provenance.entry(edge.value.clone()).or_default().insert(p);
        }
        Ok(TripletInsert {
            value: (subject, edge.value, object),
            nodes_created,
            edge_created: edge.created,
        })
    }

    /// Reports every edge whose kinds/label are outside `schema`. Edges touching
    /// a Generic node are open-world and never reported.
    pub fn validate_ontology(&self, schema: &OntologySchema) -> Vec<Violation> {
        self.edges()
            .filter_map(|edge| {
                let src_kind = self.nodes[&edge.src].kind;
                let dst_kind = self.nodes[&edge.dst].kind;
                if src_kind == NodeKind::Generic || dst_kind == NodeKind::Generic {
                    return None;
                }
                if schema.permits(src_kind, &edge.rel, dst_kind) {
                    None
                } else {
                    Some(Violation {
                        edge,
                        src_kind,
                        dst_kind,
                    })
                }
            })
            .collect()
    }

    pub fn set_hidden(&mut self, id: &str, hidden: bool) -> Result<(), GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))?;
        node.hidden = hidden;
        Ok(())
    }

    pub fn set_rating(&mut self, id: &str, rating: Option<RatingAggregate>) -> Result<(), GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))?;
        node.rating = rating.filter(|r| r.count > 0);
        Ok(())
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            nodes: self.nodes.values().cloned().collect(),
            edges: self
                .edges()
                .map(|edge| SnapshotEdge {
                    provenance: self.provenance_of(&edge).cloned().collect(),
                    src: edge.src,
                    rel: edge.rel,
                    dst: edge.dst,
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<Self, GraphError> {
        let mut graph = Graph::new();
        for node in snapshot.nodes {
            if node.id.is_empty() {
                return Err(GraphError::EmptyId);
            }
            if graph.nodes.contains_key(&node.id) {
                return Err(GraphError::Snapshot(format!("duplicate node `{}`", node.id)));
            }
            if node.rating.is_some_and(|r| r.count == 0) {
                return Err(GraphError::Snapshot(format!("node `{}` has an empty rating", node.id)));
            }
            graph.nodes.insert(node.id.clone(), node);
        }
        for edge in snapshot.edges {
            let stored = graph.add_edge(&edge.src, &edge.rel, &edge.dst)?;
            if !edge.provenance.is_empty() {
                graph
                    .provenance
                    .entry(stored)
                    .or_default()
                    .extend(edge.provenance);
            }
        }
        Ok(graph)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("graph snapshot serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, GraphError> {
        let snapshot: GraphSnapshot =
            serde_json::from_str(json).map_err(|e| GraphError::Snapshot(e.to_string()))?;
        Self::from_snapshot(snapshot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletInsert {
    pub value: (GraphNode, GraphEdge, GraphNode),
    pub nodes_created: usize,
    pub edge_created: bool,
}

fn collect_adjacent<'a>(
    edges: &'a BTreeSet<(String, String, String)>,
    id: &str,
    rel_filter: Option<&str>,
    out: &mut BTreeSet<&'a str>,
) {
    let start = (id.to_string(), String::new(), String::new());
    for (from, rel, to) in edges.range(start..) {
        if from != id {
            break;
        }
        if rel_filter.is_none_or(|r| r == rel) {
            out.insert(to.as_str());
        }
    }
}
