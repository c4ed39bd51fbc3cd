//! Describe, combine, embed and store a batch of scenarios.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::describe::{
    combine, describe_frame, describe_source, DescribeError, ScenarioDescription, SignalRule,
    TextCombiner, VisionDescriber,
};
use crate::embed::{batch_embed, EmbedError, Embedder};
use crate::ingest::{IngestError, ScenarioFile};
use crate::store::{Collection, EmbeddedRecord, RecordMetadata, StoreError};

#[derive(Debug)]
pub struct ScenarioFailure {
    pub scenario_id: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("no scenarios to index")]
    NoScenarios,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{}", FailureList(.0))]
    Scenarios(Vec<ScenarioFailure>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

struct FailureList<'a>(&'a [ScenarioFailure]);

impl fmt::Display for FailureList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} scenario(s) failed:", self.0.len())?;
        for s in self.0 {
            write!(f, "\n  {}: {}", s.scenario_id, s.reason)?;
        }
        Ok(())
    }
}

/// Adapters and settings for one indexing run.
pub struct Pipeline<'a> {
    pub rules: &'a [SignalRule],
    pub vision: &'a dyn VisionDescriber,
    pub combiner: &'a dyn TextCombiner,
    pub embedder: &'a dyn Embedder,
    pub workers: usize,
}

/// Signal text, frame text and their combination for one scenario, plus
/// warnings about skipped rules.
pub fn describe_scenario(
    file: &ScenarioFile,
    rules: &[SignalRule],
    vision: &dyn VisionDescriber,
    combiner: &dyn TextCombiner,
) -> Result<(ScenarioDescription, Vec<String>), DescribeError> {
    let signal = describe_source(file, rules);
    let vision_text = describe_frame(file.scenario.frame_ref.as_deref(), vision)?;
    let combined_text = combine(&signal.text, &vision_text, combiner)?;
    Ok((
        ScenarioDescription {
            scenario_id: file.scenario.scenario_id.clone(),
            signal_text: signal.text,
            vision_text,
            combined_text,
        },
        signal.warnings,
    ))
}

/// Reads every `*.json` scenario file in `dir`, ordered by log then window.
pub fn load_scenario_dir(dir: &Path) -> Result<Vec<ScenarioFile>, IngestError> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::MissingFile(dir.to_path_buf()),
        _ => IngestError::Io {
            path: dir.to_path_buf(),
            source: e,
        },
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut files = paths
        .iter()
        .map(|p| ScenarioFile::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    files.sort_by(|a, b| {
        (&a.scenario.log_id, a.scenario.index).cmp(&(&b.scenario.log_id, b.scenario.index))
    });
    Ok(files)
}

/// Runs the full describe → combine → embed → add pipeline. Nothing is
/// returned unless every scenario succeeds.
pub fn build_collection(
    name: &str,
    files: &[ScenarioFile],
    pipeline: &Pipeline<'_>,
) -> Result<Collection, IndexError> {
    if files.is_empty() {
        return Err(IndexError::NoScenarios);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(pipeline.workers.max(1))
        .build()
        .expect("thread pool");
    let described: Vec<_> = pool.install(|| {
        files
            .par_iter()
            .map(|f| describe_scenario(f, pipeline.rules, pipeline.vision, pipeline.combiner))
            .collect()
    });

    let mut failures = Vec::new();
    let mut descriptions = Vec::with_capacity(files.len());
    for (file, result) in files.iter().zip(described) {
        match result {
            Ok((d, warnings)) => {
                for w in warnings {
                    log::warn!("{}: {w}", file.scenario.scenario_id);
                }
                descriptions.push(d);
            }
            Err(e) => failures.push(ScenarioFailure {
                scenario_id: file.scenario.scenario_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        return Err(IndexError::Scenarios(failures));
    }

    let texts: Vec<&str> = descriptions.iter().map(|d| d.combined_text.as_str()).collect();
    let vectors = batch_embed(&texts, pipeline.embedder).map_err(|e| {
        let (index, root) = match &e {
            EmbedError::AtIndex { index, source } => (*index, source.root().to_string()),
            other => (0, other.to_string()),
        };
        IndexError::Scenarios(vec![ScenarioFailure {
            scenario_id: files[index.min(files.len() - 1)].scenario.scenario_id.clone(),
            reason: root,
        }])
    })?;

    let dim = pipeline
        .embedder
        .dim()
        .unwrap_or_else(|| vectors[0].dim());
    let mut collection = Collection::new(name, pipeline.embedder.id(), dim);
    for ((file, d), vector) in files.iter().zip(descriptions).zip(vectors) {
        let s = &file.scenario;
        collection.add(EmbeddedRecord {
            id: s.scenario_id.clone(),
            vector,
            description: d.combined_text,
            metadata: RecordMetadata {
                vehicle: s.vehicle.clone(),
                log_id: s.log_id.clone(),
                window_start: s.window_start,
                link: s.link.clone(),
            },
        })?;
    }
    Ok(collection)
}
