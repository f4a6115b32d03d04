//! Clients for out-of-process model providers.
//!
//! Every provider speaks the same protocol: one POST per call, JSON response,
//! bounded by a timeout. Rewriting, extraction and classification degrade to
//! identity or empty output on failure; embedding failures are errors since
//! no meaningful fallback vector exists.

use std::sync::OnceLock;
use std::time::Duration;

use oak_core::classify::{ClassifierProvider, ClassifyError};
use oak_core::embed::{EmbedError, EmbeddingProvider, EmbeddingVector};
use oak_core::extract::ExtractorProvider;
use oak_core::graph::Triplet;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct RemoteClient {
    url: String,
    timeout: Duration,
    // Built on first use so the client is created on a blocking thread.
    client: OnceLock<reqwest::blocking::Client>,
}

impl RemoteClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            timeout,
            client: OnceLock::new(),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn client(&self) -> &reqwest::blocking::Client {
        self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(self.timeout)
                .build()
                .expect("http client builds")
        })
    }

    fn finish<R: DeserializeOwned>(resp: reqwest::Result<reqwest::blocking::Response>) -> Result<R, String> {
        let resp = resp.map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("remote returned {status}"));
        }
        resp.json().map_err(|e| format!("bad response body: {e}"))
    }

    pub fn post_json<B: Serialize + ?Sized, R: DeserializeOwned>(&self, body: &B) -> Result<R, String> {
        Self::finish(self.client().post(&self.url).json(body).send())
    }

    pub fn post_bytes<R: DeserializeOwned>(&self, bytes: &[u8], content_type: &str) -> Result<R, String> {
        Self::finish(
            self.client()
                .post(&self.url)
                .header(reqwest::header::CONTENT_TYPE, content_type)
                .body(bytes.to_vec())
                .send(),
        )
    }
}

#[derive(Serialize)]
struct TextBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TextReply {
    text: String,
}

#[derive(Deserialize)]
struct VectorReply {
    vector: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTriplet {
    subject: String,
    relation: String,
    object: String,
}

#[derive(Deserialize)]
struct TripletReply {
    triplets: Vec<RawTriplet>,
}

#[derive(Deserialize)]
struct LabelScore {
    label: String,
    probability: f64,
}

#[derive(Deserialize)]
struct ClassifyReply {
    labels: Vec<LabelScore>,
}

/// `{text}` in, `{vector: [..]}` out.
#[derive(Debug)]
pub struct RemoteEmbedder {
    client: RemoteClient,
    dim: usize,
    name: String,
}

impl RemoteEmbedder {
    pub fn new(client: RemoteClient, dim: usize) -> Self {
        let name = format!("remote-{dim}:{}", client.url());
        Self { client, dim, name }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let reply: VectorReply = self.client.post_json(&TextBody { text }).map_err(EmbedError::Provider)?;
        EmbeddingVector::new(reply.vector)
    }
}

/// `{text}` in, `{triplets: [{subject, relation, object}]}` out. Malformed
/// triplets are dropped; failures yield no triplets.
#[derive(Debug)]
pub struct RemoteExtractor {
    client: RemoteClient,
}

impl RemoteExtractor {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl ExtractorProvider for RemoteExtractor {
    fn name(&self) -> &str {
        "remote-extractor"
    }

    fn extract(&self, text: &str) -> Vec<Triplet> {
        match self.client.post_json::<_, TripletReply>(&TextBody { text }) {
            Ok(reply) => reply
                .triplets
                .iter()
                .filter_map(|t| Triplet::new(&t.subject, &t.relation, &t.object).ok())
                .collect(),
            Err(_) => Vec::new(),
        }
    }
}

/// Raw image bytes in, `{labels: [{label, probability}]}` out.
#[derive(Debug)]
pub struct RemoteClassifier {
    client: RemoteClient,
}

impl RemoteClassifier {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl ClassifierProvider for RemoteClassifier {
    fn name(&self) -> &str {
        "remote-classifier"
    }

    fn labels(&self) -> Vec<String> {
        Vec::new()
    }

    fn classify(&self, bytes: &[u8]) -> Result<Vec<(String, f64)>, ClassifyError> {
        let reply: ClassifyReply = self
            .client
            .post_bytes(bytes, "application/octet-stream")
            .map_err(ClassifyError::Provider)?;
        Ok(reply
            .labels
            .into_iter()
            .filter(|l| l.probability.is_finite())
            .map(|l| (l.label, l.probability))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewritten {
    pub text: String,
    pub degraded: bool,
}

/// Query rewriting: identity, or `{text}` in and `{text}` out.
#[derive(Debug)]
pub enum Rewriter {
    Identity,
    Remote(RemoteClient),
}

impl Rewriter {
    pub fn rewrite(&self, text: &str) -> Rewritten {
        let identity = |degraded| Rewritten {
            text: text.to_string(),
            degraded,
        };
        match self {
            Rewriter::Identity => identity(false),
            Rewriter::Remote(client) => match client.post_json::<_, TextReply>(&TextBody { text }) {
                Ok(reply) if !reply.text.trim().is_empty() => Rewritten {
                    text: reply.text,
                    degraded: false,
                },
                _ => identity(true),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dead_client() -> RemoteClient {
        // Port 9 (discard) is closed on test hosts; the connection is refused.
        RemoteClient::new("http://127.0.0.1:9/", Duration::from_millis(300))
    }

    #[test]
    fn identity_rewrite_is_verbatim() {
        let out = Rewriter::Identity.rewrite("tache sombre");
        assert_eq!(out.text, "tache sombre");
        assert!(!out.degraded);
    }

    #[test]
    fn unreachable_providers_fall_back() {
        let out = Rewriter::Remote(dead_client()).rewrite("tache sombre");
        assert_eq!(out, Rewritten { text: "tache sombre".into(), degraded: true });
        assert!(RemoteExtractor::new(dead_client()).extract("a stain is a defect").is_empty());
        assert!(matches!(
            RemoteClassifier::new(dead_client()).classify(b"img"),
            Err(ClassifyError::Provider(_))
        ));
        assert!(matches!(
            RemoteEmbedder::new(dead_client(), 4).embed("x"),
            Err(EmbedError::Provider(_))
        ));
    }
}
