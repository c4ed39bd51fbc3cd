use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use genius_core::evaluate::{
    arlg_baseline, arlg_classify, distance_curves, mean_relative_gap, model_comparison_with_outliers,
    profile_for, retrieval_metrics, truth_index, z_score, ComparisonRuns, EvalError, QuerySet,
    QuerySpec, RetrievalReport, TruthEntry, Verdict, DEFAULT_Z_THRESHOLD,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::commands::{build_embedder, load_store};
use crate::config::Config;
use crate::{EmbedderArgs, Failure};

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    #[arg(long, env = "GENIUS_STORE")]
    store: Option<PathBuf>,
    /// JSON array of {"query", "set": correct|incorrect|test}
    #[arg(long)]
    queries: PathBuf,
    /// JSON array of {"query", "correct_ids": [...]}
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Report file (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Distance curves (CSV: query,rank,distance,label)
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Z-score at or below which the closest hit counts as an answer [default: -2]
    #[arg(long, env = "GENIUS_Z_THRESHOLD", allow_hyphen_values = true)]
    z_threshold: Option<f64>,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

#[derive(Debug, Args)]
pub struct ModelsArgs {
    /// JSON {"categories": [{"category", "iterations": [{"correct": [..], "incorrect": [..]}]}]}
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct QueryReport {
    query: String,
    set: QuerySet,
    #[serde(flatten)]
    metrics: RetrievalReport,
    /// Null when the profile is too short or flat for a Z-score.
    z_score: Option<f64>,
    has_answer: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_note: Option<String>,
    /// Test-set queries only, against the correct/incorrect baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
}

#[derive(Debug, Serialize)]
struct SetSummary {
    queries: usize,
    arlg: f64,
    /// Queries whose closest hit passed the Z-score test.
    z_validated: usize,
}

#[derive(Debug, Default, Serialize)]
struct Sets {
    correct: Option<SetSummary>,
    incorrect: Option<SetSummary>,
    test: Option<SetSummary>,
}

#[derive(Debug, Serialize)]
struct RetrievalEvaluation {
    collection: String,
    embedder_id: String,
    record_count: usize,
    z_threshold: f64,
    queries: Vec<QueryReport>,
    sets: Sets,
    /// Midpoint of the correct and incorrect ARLGs.
    baseline_arlg: Option<f64>,
    /// The test set's ARLG classified against the baseline.
    test_verdict: Option<Verdict>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn summarise(reports: &[QueryReport], set: QuerySet) -> Result<Option<SetSummary>, Failure> {
    let members: Vec<&QueryReport> = reports.iter().filter(|r| r.set == set).collect();
    if members.is_empty() {
        return Ok(None);
    }
    let gaps: Vec<f64> = members.iter().map(|r| r.metrics.relative_largest_gap).collect();
    Ok(Some(SetSummary {
        queries: members.len(),
        arlg: mean_relative_gap(&gaps)?,
        z_validated: members.iter().filter(|r| r.has_answer == Some(true)).count(),
    }))
}

pub fn retrieval(a: RetrievalArgs, config: &Config) -> Result<(), Failure> {
    let store: PathBuf = config.require(a.store, "store")?;
    let threshold = config.pick_or(a.z_threshold, "z_threshold", DEFAULT_Z_THRESHOLD)?;
    let embedder = build_embedder(&a.embedder, config)?;
    let collection = load_store(&store)?;
    let specs: Vec<QuerySpec> = read_json(&a.queries)?;
    if specs.is_empty() {
        return Err(Failure::Data(format!("{}: no queries", a.queries.display())));
    }
    let truth = match &a.truth {
        Some(p) => {
            let entries: Vec<TruthEntry> = read_json(p)?;
            Some(truth_index(&entries, &collection)?)
        }
        None => None,
    };

    let mut profiles = Vec::with_capacity(specs.len());
    let mut reports = Vec::with_capacity(specs.len());
    for spec in &specs {
        let correct = truth.as_ref().and_then(|t| t.get(&spec.query));
        let profile = profile_for(&collection, &spec.query, embedder.as_ref(), correct)?;
        let metrics = retrieval_metrics(&profile)
            .map_err(|e| Failure::Data(format!("query {:?}: {e}", spec.query)))?;
        let (z, has_answer, z_note) = match z_score(&profile) {
            Ok(z) => (Some(z), Some(z <= threshold), None),
            Err(e @ (EvalError::DegenerateProfile | EvalError::TooFewDistances { .. })) => {
                (None, None, Some(e.to_string()))
            }
            Err(e) => return Err(Failure::Data(format!("query {:?}: {e}", spec.query))),
        };
        reports.push(QueryReport {
            query: spec.query.clone(),
            set: spec.set,
            metrics,
            z_score: z,
            has_answer,
            z_note,
            verdict: None,
        });
        profiles.push(profile);
    }

    let sets = Sets {
        correct: summarise(&reports, QuerySet::Correct)?,
        incorrect: summarise(&reports, QuerySet::Incorrect)?,
        test: summarise(&reports, QuerySet::Test)?,
    };
    let mut baseline = None;
    let mut test_verdict = None;
    if let (Some(c), Some(i)) = (&sets.correct, &sets.incorrect) {
        baseline = Some(arlg_baseline(c.arlg, i.arlg));
        for r in reports.iter_mut().filter(|r| r.set == QuerySet::Test) {
            r.verdict = Some(arlg_classify(r.metrics.relative_largest_gap, c.arlg, i.arlg));
        }
        test_verdict = sets.test.as_ref().map(|t| arlg_classify(t.arlg, c.arlg, i.arlg));
    }

    for r in &reports {
        let z = r.z_score.map_or_else(|| "n/a".to_owned(), |z| format!("{z:.3}"));
        let set = serde_json::to_value(r.set)?;
        println!(
            "{:<9} rel_lg={:.3} z={z:>7} {}",
            set.as_str().unwrap_or_default(),
            r.metrics.relative_largest_gap,
            r.query
        );
    }
    for (name, s) in [("correct", &sets.correct), ("incorrect", &sets.incorrect), ("test", &sets.test)] {
        if let Some(s) = s {
            println!("ARLG {name}: {:.4} ({}/{} z-validated)", s.arlg, s.z_validated, s.queries);
        }
    }
    if let (Some(b), Some(v)) = (baseline, test_verdict) {
        println!("baseline {b:.4}: test set is {}", serde_json::to_value(v)?.as_str().unwrap_or_default());
    }

    let evaluation = RetrievalEvaluation {
        collection: collection.name().to_owned(),
        embedder_id: collection.embedder_id().to_owned(),
        record_count: collection.len(),
        z_threshold: threshold,
        queries: reports,
        sets,
        baseline_arlg: baseline,
        test_verdict,
    };
    write_json(&a.out, &evaluation)?;
    if let Some(path) = &a.curves {
        write_text(path, &distance_curves(&profiles))?;
    }
    Ok(())
}

pub fn models(a: ModelsArgs) -> Result<(), Failure> {
    let runs: ComparisonRuns = read_json(&a.runs)?;
    let comparison = model_comparison_with_outliers(&runs)?;
    let r = &comparison.with_outliers;
    println!(
        "mean correct {:.4}, mean incorrect {:.4}, difference {:.4}; highest correct {:.4}, lowest incorrect {:.4}, smallest difference {:.4}; avg scenario SD {:.4}",
        r.mean_dist_correct,
        r.mean_dist_incorrect,
        r.mean_distance_difference,
        r.highest_dist_correct,
        r.lowest_dist_incorrect,
        r.smallest_distance_difference,
        r.avg_std_dev_of_scenarios
    );
    write_json(&a.out, &comparison)
}
