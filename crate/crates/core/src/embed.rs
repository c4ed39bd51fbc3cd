//! Text embedders.
//!
//! [`HashEmbedder`] is the deterministic reference: signed feature hashing of
//! lowercase alphanumeric tokens into `D` buckets, then L2 normalisation. It
//! is a bag of tokens, so word order is ignored. [`HttpEmbedder`] talks to a
//! remote model service and re-normalises whatever it returns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fnv::fnv1a64;
use crate::http::{HttpFailure, HttpSettings, JsonClient};

pub const DEFAULT_DIM: usize = 256;
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("text has no alphanumeric tokens: {0:?}")]
    NoTokens(String),
    #[error("token hashes cancel out to a zero vector for {0:?}")]
    ZeroVector(String),
    #[error("embedder service unavailable: {0}")]
    EmbedderServiceUnavailable(String),
    #[error("embedder service sent a malformed reply: {0}")]
    EmbedderServiceMalformedReply(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("text {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<EmbedError>,
    },
}

impl EmbedError {
    /// Strips any [`EmbedError::AtIndex`] wrapping.
    pub fn root(&self) -> &EmbedError {
        match self {
            EmbedError::AtIndex { source, .. } => source.root(),
            other => other,
        }
    }
}

/// A finite, unit-norm vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Scales `values` to unit length. Fails on empty, zero, or non-finite input.
    pub fn normalized(values: Vec<f64>) -> Result<Self, String> {
        if values.is_empty() {
            return Err("empty vector".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err("non-finite component".into());
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err("zero-length vector".into());
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    /// Wraps values that are already unit norm (within [`NORM_TOLERANCE`]).
    pub fn from_unit(values: Vec<f64>) -> Result<Self, String> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err("vector must be non-empty and finite".into());
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(format!("norm {norm} is not 1"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = String;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::from_unit(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Maps description text to vectors.
pub trait Embedder: Send + Sync {
    /// Stable identifier; a collection only accepts vectors from one embedder.
    fn id(&self) -> String;

    /// Output dimension, if known before the first call.
    fn dim(&self) -> Option<usize>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.embed_batch(&[text])
            .map(|mut v| v.pop().expect("one vector per text"))
            .map_err(|e| e.root().clone())
    }

    /// Whether the backing service looks reachable.
    fn healthy(&self) -> bool {
        true
    }
}

pub fn embed(text: &str, embedder: &dyn Embedder) -> Result<EmbeddingVector, EmbedError> {
    embedder.embed(text)
}

/// Embeds every text; errors carry the index of the failing text.
pub fn batch_embed(
    texts: &[&str],
    embedder: &dyn Embedder,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    for (index, t) in texts.iter().enumerate() {
        if tokenize(t).next().is_none() {
            return Err(EmbedError::AtIndex {
                index,
                source: Box::new(EmbedError::NoTokens((*t).to_owned())),
            });
        }
    }
    embedder.embed_batch(texts)
}

/// Lowercase runs of alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Signed feature hashing over FNV-1a token hashes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }

    /// (bucket, sign) for one token.
    pub fn slot(&self, token: &str) -> (usize, f64) {
        let h = fnv1a64(token.as_bytes());
        let bucket = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut acc = vec![0.0; self.dim];
        let mut any = false;
        for token in tokenize(text) {
            let (bucket, sign) = self.slot(&token);
            acc[bucket] += sign;
            any = true;
        }
        if !any {
            return Err(EmbedError::NoTokens(text.to_owned()));
        }
        EmbeddingVector::normalized(acc).map_err(|_| EmbedError::ZeroVector(text.to_owned()))
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-fnv1a-{}", self.dim)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                self.embed_text(t).map_err(|e| EmbedError::AtIndex {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.embed_text(text)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedReply {
    embeddings: Vec<Vec<f64>>,
    dim: usize,
}

/// Client for a remote embedding service (`POST /embed`).
pub struct HttpEmbedder {
    client: JsonClient,
    id: String,
    expected_dim: Option<usize>,
    batch_size: usize,
    concurrency: usize,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings) -> Self {
        let id = format!("http:{}", settings.endpoint);
        Self {
            client: JsonClient::new(settings),
            id,
            expected_dim: None,
            batch_size: 32,
            concurrency: 4,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Rejects replies whose dimension differs from `dim`.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.expected_dim = Some(dim);
        self
    }

    pub fn with_batching(mut self, batch_size: usize, concurrency: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self.concurrency = concurrency.max(1);
        self
    }

    pub fn settings(&self) -> &HttpSettings {
        self.client.settings()
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let reply: EmbedReply = self
            .client
            .post("/embed", &EmbedRequest { texts })
            .map_err(|e| match e {
                HttpFailure::Unavailable(m) => EmbedError::EmbedderServiceUnavailable(m),
                HttpFailure::Malformed(m) => EmbedError::EmbedderServiceMalformedReply(m),
            })?;
        if reply.embeddings.len() != texts.len() {
            return Err(EmbedError::EmbedderServiceMalformedReply(format!(
                "{} embeddings for {} texts",
                reply.embeddings.len(),
                texts.len()
            )));
        }
        if let Some(expected) = self.expected_dim {
            if reply.dim != expected {
                return Err(EmbedError::DimensionMismatch {
                    expected,
                    actual: reply.dim,
                });
            }
        }
        reply
            .embeddings
            .into_iter()
            .map(|v| {
                if v.len() != reply.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: reply.dim,
                        actual: v.len(),
                    });
                }
                EmbeddingVector::normalized(v).map_err(EmbedError::EmbedderServiceMalformedReply)
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn dim(&self) -> Option<usize> {
        self.expected_dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let chunks: Vec<(usize, &[&str])> = texts
            .chunks(self.batch_size)
            .enumerate()
            .map(|(i, c)| (i * self.batch_size, c))
            .collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in chunks.chunks(self.concurrency) {
            let results: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|&(start, chunk)| scope.spawn(move || (start, self.request(chunk))))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for (start, result) in results {
                let vectors = result.map_err(|e| EmbedError::AtIndex {
                    index: start,
                    source: Box::new(e),
                })?;
                out.extend(vectors);
            }
        }
        Ok(out)
    }

    fn healthy(&self) -> bool {
        self.client.reachable()
    }
}
