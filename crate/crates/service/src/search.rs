//! Multimodal search requests, per-channel rankings and rank fusion.

use std::collections::BTreeMap;

use oak_core::embed::ScoredContext;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Constant of reciprocal rank fusion: a channel contributes `1 / (RRF_K + rank)`.
pub const RRF_K: f64 = 60.0;

pub const TEXT_CHANNEL: &str = "text";
pub const IMAGE_CHANNEL: &str = "image";

/// Context texts returned as evidence per result.
pub const EVIDENCE_TEXTS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub audio_transcript: Option<String>,
    #[serde(default)]
    pub image_media_id: Option<String>,
    /// Defaults to the configured `default_k`.
    #[serde(default)]
    pub k: Option<usize>,
    /// Defaults to the configured `default_rating_weight`.
    #[serde(default)]
    pub rating_weight: Option<f64>,
}

impl SearchRequest {
    pub fn text(text: &str) -> Self {
        Self {
            text: Some(text.to_string()),
            ..Self::default()
        }
    }

    pub fn image(media_id: &str) -> Self {
        Self {
            image_media_id: Some(media_id.to_string()),
            ..Self::default()
        }
    }

    /// Text and transcript joined by a space. A present but blank field is
    /// rejected.
    pub fn merged_text(&self) -> Result<Option<String>, ServiceError> {
        let mut parts = Vec::new();
        for (field, value) in [("text", &self.text), ("audio_transcript", &self.audio_transcript)] {
            if let Some(v) = value {
                if v.trim().is_empty() {
                    return Err(ServiceError::BadRequest(format!("{field} must not be blank")));
                }
                parts.push(v.as_str());
            }
        }
        Ok((!parts.is_empty()).then(|| parts.join(" ")))
    }

    pub fn image_id(&self) -> Result<Option<&str>, ServiceError> {
        match self.image_media_id.as_deref().map(str::trim) {
            Some("") => Err(ServiceError::BadRequest("image_media_id must not be blank".into())),
            other => Ok(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelHit {
    /// 1-based position in the channel's own ranking.
    pub rank: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub texts: Vec<String>,
    pub image_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub defect_id: String,
    pub fused_score: f64,
    pub channels: BTreeMap<String, ChannelHit>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub results: Vec<SearchResult>,
    /// A remote provider failed and a fallback was used.
    pub degraded: bool,
}

/// One channel's ranking of distinct defect ids, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: &'static str,
    pub ranking: Vec<(String, f64)>,
}

/// Merges channel rankings into at most `k` results.
///
/// A single channel keeps its native order and scores. Several channels are
/// combined by reciprocal rank fusion, where a defect absent from a channel
/// gets nothing from it, and results are ordered by fused score descending
/// then defect id ascending.
pub fn fuse(channels: &[Channel], k: usize) -> Vec<SearchResult> {
    let result = |defect_id: &str, fused_score: f64| SearchResult {
        defect_id: defect_id.to_string(),
        fused_score,
        channels: BTreeMap::new(),
        evidence: Evidence::default(),
    };

    if let [only] = channels {
        return only
            .ranking
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, (id, score))| {
                let mut r = result(id, *score);
                r.channels.insert(only.name.to_string(), ChannelHit { rank: i + 1, score: *score });
                r
            })
            .collect();
    }

    let mut merged: BTreeMap<&str, SearchResult> = BTreeMap::new();
    for channel in channels {
        for (i, (id, score)) in channel.ranking.iter().enumerate() {
            let rank = i + 1;
            let entry = merged.entry(id.as_str()).or_insert_with(|| result(id, 0.0));
            entry.fused_score += 1.0 / (RRF_K + rank as f64);
            entry.channels.insert(channel.name.to_string(), ChannelHit { rank, score: *score });
        }
    }
    let mut out: Vec<SearchResult> = merged.into_values().collect();
    out.sort_by(|a, b| {
        b.fused_score
            .total_cmp(&a.fused_score)
            .then_with(|| a.defect_id.cmp(&b.defect_id))
    });
    out.truncate(k);
    out
}

/// A defect's position in the text channel with the contexts that got it there.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedHit {
    pub node_id: String,
    pub score: f64,
    pub context_ids: Vec<u64>,
}

/// Collapses a context ranking to one entry per accepted node, placed at its
/// best context. Context ids are kept in ranking order.
pub fn collapse_by_node(ranked: &[ScoredContext], accept: impl Fn(&str) -> bool) -> Vec<CollapsedHit> {
    let mut out: Vec<CollapsedHit> = Vec::new();
    let mut position: BTreeMap<&str, usize> = BTreeMap::new();
    for ctx in ranked {
        if let Some(&i) = position.get(ctx.node_id.as_str()) {
            out[i].context_ids.push(ctx.context_id);
            continue;
        }
        if !accept(&ctx.node_id) {
            continue;
        }
        position.insert(&ctx.node_id, out.len());
        out.push(CollapsedHit {
            node_id: ctx.node_id.clone(),
            score: ctx.score,
            context_ids: vec![ctx.context_id],
        });
    }
    out
}
