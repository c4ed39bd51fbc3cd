//! Persistent vector collection with exact squared-Euclidean top-N search.
//!
//! Store file layout (JSON Lines):
//!
//! ```text
//! {"schema":1,"name":"...","embedder_id":"...","dim":256}
//! {"id":"...","vector":[...],"description":"...","metadata":{...}}
//! ...
//! {"checksum":"<16 hex digits>"}
//! ```
//!
//! Vector components are written with 17 significant digits so they parse
//! back to the identical `f64`. The checksum is FNV-1a 64 over every byte
//! before the checksum line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{squared_distance, EmbeddingVector};
use crate::fnv::fnv1a64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("dimension mismatch: collection has {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("collection is empty")]
    EmptyCollection,
    #[error("result count must be at least 1")]
    InvalidCount,
    #[error("i/o error on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store at line {line}: {reason}")]
    CorruptStore { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordMetadata {
    pub vehicle: String,
    pub log_id: String,
    pub window_start: f64,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddedRecord {
    pub id: String,
    pub vector: EmbeddingVector,
    pub description: String,
    pub metadata: RecordMetadata,
}

/// One search hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<'a> {
    pub record: &'a EmbeddedRecord,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct Collection {
    name: String,
    embedder_id: String,
    dim: usize,
    records: Vec<EmbeddedRecord>,
    positions: HashMap<String, usize>,
    // All vectors back to back, for a cache-friendly scan.
    flat: Vec<f64>,
}

impl PartialEq for Collection {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.embedder_id == other.embedder_id
            && self.dim == other.dim
            && self.records == other.records
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: u32,
    name: String,
    embedder_id: String,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Trailer {
    checksum: String,
}

impl Collection {
    pub fn new(name: impl Into<String>, embedder_id: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            embedder_id: embedder_id.into(),
            dim,
            records: Vec::new(),
            positions: HashMap::new(),
            flat: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddedRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddedRecord> {
        self.positions.get(id).map(|&i| &self.records[i])
    }

    pub fn add(&mut self, record: EmbeddedRecord) -> Result<(), StoreError> {
        if record.vector.dim() != self.dim {
            return Err(StoreError::DimensionMismatch {
                expected: self.dim,
                actual: record.vector.dim(),
            });
        }
        if self.positions.contains_key(&record.id) {
            return Err(StoreError::DuplicateId(record.id));
        }
        self.positions.insert(record.id.clone(), self.records.len());
        self.flat.extend_from_slice(record.vector.as_slice());
        self.records.push(record);
        Ok(())
    }

    /// The `n` nearest records by squared Euclidean distance, ascending;
    /// equal distances keep insertion order.
    pub fn query(&self, q: &[f64], n: usize) -> Result<Vec<Hit<'_>>, StoreError> {
        if q.len() != self.dim {
            return Err(StoreError::DimensionMismatch {
                expected: self.dim,
                actual: q.len(),
            });
        }
        if self.records.is_empty() {
            return Err(StoreError::EmptyCollection);
        }
        if n == 0 {
            return Err(StoreError::InvalidCount);
        }
        let mut scored: Vec<(f64, usize)> = self
            .flat
            .chunks_exact(self.dim)
            .map(|v| squared_distance(v, q))
            .zip(0..)
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let n = n.min(scored.len());
        if n < scored.len() {
            scored.select_nth_unstable_by(n - 1, order);
            scored.truncate(n);
        }
        scored.sort_unstable_by(order);
        Ok(scored
            .into_iter()
            .map(|(distance, i)| Hit {
                record: &self.records[i],
                distance,
            })
            .collect())
    }

    /// Serialises to the store file format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        let header = Header {
            schema: SCHEMA_VERSION,
            name: self.name.clone(),
            embedder_id: self.embedder_id.clone(),
            dim: self.dim,
        };
        out.push_str(&serde_json::to_string(&header).expect("header serialises"));
        out.push('\n');
        for r in &self.records {
            write_record(&mut out, r);
            out.push('\n');
        }
        let checksum = fnv1a64(out.as_bytes());
        let trailer = Trailer {
            checksum: format!("{checksum:016x}"),
        };
        out.push_str(&serde_json::to_string(&trailer).expect("trailer serialises"));
        out.push('\n');
        out.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let corrupt = |line: usize, reason: String| StoreError::CorruptStore { line, reason };
        let text = std::str::from_utf8(bytes).map_err(|e| corrupt(0, e.to_string()))?;
        let Some(body) = text.strip_suffix('\n') else {
            return Err(corrupt(
                text.lines().count().max(1),
                "missing final newline (truncated?)".into(),
            ));
        };
        let lines: Vec<&str> = body.split('\n').collect();
        if lines.len() < 2 {
            return Err(corrupt(lines.len(), "missing header or checksum line".into()));
        }
        let last = lines.len();
        let trailer: Trailer = serde_json::from_str(lines[last - 1])
            .map_err(|e| corrupt(last, format!("bad checksum line: {e}")))?;
        let covered = &text[..text.len() - lines[last - 1].len() - 1];
        let actual = format!("{:016x}", fnv1a64(covered.as_bytes()));
        if trailer.checksum != actual {
            return Err(corrupt(
                last,
                format!("checksum {} does not match contents ({actual})", trailer.checksum),
            ));
        }

        let header: Header =
            serde_json::from_str(lines[0]).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
        if header.schema != SCHEMA_VERSION {
            return Err(corrupt(1, format!("unsupported schema {}", header.schema)));
        }
        let mut c = Collection::new(header.name, header.embedder_id, header.dim);
        for (i, line) in lines[1..last - 1].iter().enumerate() {
            let lineno = i + 2;
            let record: EmbeddedRecord =
                serde_json::from_str(line).map_err(|e| corrupt(lineno, e.to_string()))?;
            c.add(record).map_err(|e| corrupt(lineno, e.to_string()))?;
        }
        Ok(c)
    }

    /// Writes atomically: temp file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let io = |source| StoreError::IoFailure {
            path: path.to_path_buf(),
            source,
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut builder = tempfile::Builder::new();
        // Temp files default to owner-only; a store is an ordinary data file.
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            builder.permissions(fs::Permissions::from_mode(0o644));
        }
        let mut tmp = builder.tempfile_in(dir).map_err(io)?;
        tmp.write_all(&self.to_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = fs::read(path).map_err(|source| StoreError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn write_record(out: &mut String, r: &EmbeddedRecord) {
    let json = |s: &str| serde_json::to_string(s).expect("string serialises");
    write!(out, "{{\"id\":{},\"vector\":[", json(&r.id)).unwrap();
    for (i, v) in r.vector.as_slice().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v:.16e}").unwrap();
    }
    write!(
        out,
        "],\"description\":{},\"metadata\":{}}}",
        json(&r.description),
        serde_json::to_string(&r.metadata).expect("metadata serialises")
    )
    .unwrap();
}

/// A collection behind a reader/writer lock: many concurrent readers or
/// one writer, and readers never see a half-added record.
#[derive(Debug, Clone)]
pub struct SharedCollection(Arc<RwLock<Collection>>);

impl SharedCollection {
    pub fn new(collection: Collection) -> Self {
        Self(Arc::new(RwLock::new(collection)))
    }

    pub fn read(&self) -> parking_lot::RwLockReadGuard<'_, Collection> {
        self.0.read()
    }

    pub fn add(&self, record: EmbeddedRecord) -> Result<(), StoreError> {
        self.0.write().add(record)
    }
}
