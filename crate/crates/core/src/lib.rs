//! Scenario retrieval over vehicle logs.
//!
//! The pipeline has three stages:
//!
//! 1. [`ingest`] parses signal logs and cuts them into fixed-length
//!    [`Scenario`](ingest::Scenario)s, and [`describe`] turns each scenario's
//!    signals and camera frame into text.
//! 2. [`embed`] maps the combined description to a unit-norm vector and
//!    [`store`] keeps the vectors in a persistent [`Collection`](store::Collection).
//! 3. [`retrieve`] embeds a natural-language query and ranks stored scenarios
//!    by squared Euclidean distance.
//!
//! [`evaluate`] holds the retrieval-quality metrics (largest gap, relative
//! largest gap, ARLG, Z-score validation, model comparison) and [`demo`]
//! generates a reproducible synthetic corpus for exercising all of the above.

pub mod demo;
pub mod describe;
pub mod embed;
pub mod evaluate;
pub mod fnv;
pub mod index;
pub mod ingest;
mod http;
pub mod retrieve;
pub mod store;

pub use http::HttpSettings;
pub use describe::{ScenarioDescription, SignalRule};
pub use embed::{Embedder, EmbeddingVector, HashEmbedder};
pub use ingest::{LogManifest, Scenario, SignalLog};
pub use retrieve::QueryResult;
pub use store::{Collection, EmbeddedRecord, RecordMetadata};
