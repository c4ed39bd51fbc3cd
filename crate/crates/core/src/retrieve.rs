//! Natural-language search over a collection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, Embedder};
use crate::store::{Collection, Hit, RecordMetadata, StoreError};

pub const DEFAULT_RESULT_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("collection was built with embedder {collection:?}, query uses {query:?}")]
    EmbedderMismatch { collection: String, query: String },
    #[error("collection is empty")]
    EmptyCollection,
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for SearchError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::EmptyCollection => SearchError::EmptyCollection,
            other => SearchError::Store(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub id: String,
    pub distance: f64,
    pub description: String,
    pub metadata: RecordMetadata,
}

impl From<Hit<'_>> for ResultEntry {
    fn from(h: Hit<'_>) -> Self {
        Self {
            id: h.record.id.clone(),
            distance: h.distance,
            description: h.record.description.clone(),
            metadata: h.record.metadata.clone(),
        }
    }
}

/// Ranked answer to one query, ascending by distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub results: Vec<ResultEntry>,
}

pub fn search(
    collection: &Collection,
    query_text: &str,
    n: usize,
    embedder: &dyn Embedder,
) -> Result<QueryResult, SearchError> {
    let embedder_id = embedder.id();
    if embedder_id != collection.embedder_id() {
        return Err(SearchError::EmbedderMismatch {
            collection: collection.embedder_id().to_owned(),
            query: embedder_id,
        });
    }
    if collection.is_empty() {
        return Err(SearchError::EmptyCollection);
    }
    let q = embedder.embed(query_text)?;
    let hits = collection.query(q.as_slice(), n)?;
    Ok(QueryResult {
        query: query_text.to_owned(),
        results: hits.into_iter().map(ResultEntry::from).collect(),
    })
}
