//! Python module `genius`: embedding, the scenario store, search and the
//! retrieval metrics.
//!
//! Structured results (metrics, search hits, scenarios) come back as plain
//! dicts; failures raise `genius.GeniusError`.

use std::path::PathBuf;

use genius_core::embed::{Embedder, EmbeddingVector};
use genius_core::evaluate::{self, DistanceProfile, RetrievalReport, Verdict};
use genius_core::ingest;
use genius_core::retrieve;
use genius_core::store::{self, EmbeddedRecord, RecordMetadata};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(genius, GeniusError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    GeniusError::new_err(e.to_string())
}

/// Serialisable value → Python object via the `json` module.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Signed feature-hashing embedder (deterministic, no service needed).
#[pyclass(frozen)]
struct HashEmbedder(genius_core::HashEmbedder);

#[pymethods]
impl HashEmbedder {
    #[new]
    #[pyo3(signature = (dim = genius_core::embed::DEFAULT_DIM))]
    fn new(dim: usize) -> PyResult<Self> {
        if dim == 0 {
            return Err(err("dimension must be positive"));
        }
        Ok(Self(genius_core::HashEmbedder::new(dim)))
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id()
    }

    #[getter]
    fn dim(&self) -> Option<usize> {
        self.0.dim()
    }

    fn embed(&self, text: &str) -> PyResult<Vec<f64>> {
        self.0.embed(text).map(EmbeddingVector::into_inner).map_err(err)
    }

    fn embed_batch(&self, texts: Vec<String>) -> PyResult<Vec<Vec<f64>>> {
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = genius_core::embed::batch_embed(&refs, &self.0).map_err(err)?;
        Ok(vectors.into_iter().map(EmbeddingVector::into_inner).collect())
    }

    fn __repr__(&self) -> String {
        format!("HashEmbedder(id={:?})", self.0.id())
    }
}

/// An in-memory scenario store; `load`/`save` use the JSONL store format.
#[pyclass]
struct Collection(store::Collection);

#[pymethods]
impl Collection {
    #[new]
    fn new(name: String, embedder_id: String, dim: usize) -> Self {
        Self(store::Collection::new(name, embedder_id, dim))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        store::Collection::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn embedder_id(&self) -> &str {
        self.0.embedder_id()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, id: &str) -> bool {
        self.0.get(id).is_some()
    }

    fn ids(&self) -> Vec<String> {
        self.0.records().iter().map(|r| r.id.clone()).collect()
    }

    /// The stored record as a dict, or None.
    fn get<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.0.get(id).map(|r| to_py(py, r)).transpose()
    }

    /// `vector` must already be unit length.
    #[pyo3(signature = (id, vector, description, vehicle = String::new(), log_id = String::new(), window_start = 0.0, link = String::new()))]
    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        id: String,
        vector: Vec<f64>,
        description: String,
        vehicle: String,
        log_id: String,
        window_start: f64,
        link: String,
    ) -> PyResult<()> {
        let vector = EmbeddingVector::from_unit(vector).map_err(err)?;
        self.0
            .add(EmbeddedRecord {
                id,
                vector,
                description,
                metadata: RecordMetadata {
                    vehicle,
                    log_id,
                    window_start,
                    link,
                },
            })
            .map_err(err)
    }

    /// `(id, squared distance)` pairs for the `n` nearest records, ascending.
    #[pyo3(signature = (vector, n = retrieve::DEFAULT_RESULT_COUNT))]
    fn query(&self, vector: Vec<f64>, n: usize) -> PyResult<Vec<(String, f64)>> {
        let hits = self.0.query(&vector, n).map_err(err)?;
        Ok(hits.into_iter().map(|h| (h.record.id.clone(), h.distance)).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Collection(name={:?}, embedder_id={:?}, dim={}, len={})",
            self.0.name(),
            self.0.embedder_id(),
            self.0.dim(),
            self.0.len()
        )
    }
}

/// Embeds `text` and returns `{"query", "results": [{id, distance, description, metadata}]}`.
#[pyfunction]
#[pyo3(signature = (collection, text, embedder, n = retrieve::DEFAULT_RESULT_COUNT))]
fn search<'py>(
    py: Python<'py>,
    collection: &Collection,
    text: &str,
    embedder: &HashEmbedder,
    n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let result = retrieve::search(&collection.0, text, n, &embedder.0).map_err(err)?;
    to_py(py, &result)
}

fn profile(distances: Vec<f64>) -> PyResult<DistanceProfile> {
    DistanceProfile::new("", distances, None).map_err(err)
}

/// Largest gap, min/max, range, population SD and relative largest gap.
#[pyfunction]
fn retrieval_metrics(py: Python<'_>, distances: Vec<f64>) -> PyResult<Bound<'_, PyAny>> {
    let report = evaluate::metrics_from_distances(&distances).map_err(err)?;
    to_py(py, &report)
}

/// Same report from already-measured values.
#[pyfunction]
fn metrics_from_measurements(
    py: Python<'_>,
    largest_gap: f64,
    min_distance: f64,
    max_distance: f64,
    std_dev: f64,
) -> PyResult<Bound<'_, PyAny>> {
    to_py(
        py,
        &RetrievalReport::from_measurements(largest_gap, min_distance, max_distance, std_dev),
    )
}

/// Average relative largest gap over several distance lists.
#[pyfunction]
fn arlg(profiles: Vec<Vec<f64>>) -> PyResult<f64> {
    let profiles = profiles.into_iter().map(profile).collect::<PyResult<Vec<_>>>()?;
    evaluate::arlg(&profiles).map_err(err)
}

#[pyfunction]
fn arlg_baseline(correct_arlg: f64, incorrect_arlg: f64) -> f64 {
    evaluate::arlg_baseline(correct_arlg, incorrect_arlg)
}

/// "answer-like" or "no-answer-like".
#[pyfunction]
fn arlg_classify(test_arlg: f64, correct_arlg: f64, incorrect_arlg: f64) -> &'static str {
    match evaluate::arlg_classify(test_arlg, correct_arlg, incorrect_arlg) {
        Verdict::AnswerLike => "answer-like",
        Verdict::NoAnswerLike => "no-answer-like",
    }
}

/// Z-score of the closest distance against the rest.
#[pyfunction]
fn z_score(distances: Vec<f64>) -> PyResult<f64> {
    evaluate::z_score(&profile(distances)?).map_err(err)
}

/// Summary of one log: manifest fields, row count and signal names.
#[pyfunction]
fn load_log(py: Python<'_>, manifest: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    let log = ingest::load_log(&manifest).map_err(err)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        manifest: &'a ingest::LogManifest,
        rows: usize,
        signals: &'a [String],
    }
    to_py(
        py,
        &Summary {
            manifest: &log.manifest,
            rows: log.len(),
            signals: log.signal_names(),
        },
    )
}

/// The scenarios a log splits into at `window_s` seconds.
#[pyfunction]
#[pyo3(signature = (manifest, window_s = ingest::DEFAULT_WINDOW_S))]
fn segment(py: Python<'_>, manifest: PathBuf, window_s: f64) -> PyResult<Bound<'_, PyAny>> {
    let log = ingest::load_log(&manifest).map_err(err)?;
    let scenarios = ingest::segment(&log, window_s).map_err(err)?;
    to_py(py, &scenarios)
}

#[pymodule]
pub fn genius(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GeniusError", m.py().get_type::<GeniusError>())?;
    m.add_class::<HashEmbedder>()?;
    m.add_class::<Collection>()?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(retrieval_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_from_measurements, m)?)?;
    m.add_function(wrap_pyfunction!(arlg, m)?)?;
    m.add_function(wrap_pyfunction!(arlg_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(arlg_classify, m)?)?;
    m.add_function(wrap_pyfunction!(z_score, m)?)?;
    m.add_function(wrap_pyfunction!(load_log, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    Ok(())
}
