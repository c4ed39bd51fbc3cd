//! Retrieval-quality metrics.
//!
//! Per query, the full ascending list of distances to every stored scenario
//! (a [`DistanceProfile`]) is summarised by its largest adjacent gap, its
//! extremes, range, population standard deviation, and the gap relative to
//! the range. Averaging the relative gap over a query set gives the ARLG,
//! used to tell answer-like profiles from no-answer-like ones. A Z-score test
//! asks whether the closest hit stands out from the rest. For comparing
//! description models, [`model_comparison`] summarises distances to known
//! correct and incorrect scenarios over repeated iterations.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Embedder;
use crate::retrieve::{search, SearchError};
use crate::store::Collection;

pub const DEFAULT_Z_THRESHOLD: f64 = -2.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("distance profile is empty")]
    EmptyProfile,
    #[error("no profiles given")]
    EmptyInput,
    #[error("need at least {needed} distances, got {got}")]
    TooFewDistances { needed: usize, got: usize },
    #[error("all distances after the first are equal; Z-score undefined")]
    DegenerateProfile,
    #[error("distance {0} is not finite")]
    NonFinite(f64),
    #[error("{labels} labels for {distances} distances")]
    MisalignedLabels { labels: usize, distances: usize },
    #[error("missing labels: {0}")]
    MissingLabels(String),
    #[error("category {category:?} has {got} iterations, need at least 2")]
    TooFewIterations { category: String, got: usize },
    #[error("ground truth for {query:?} names unknown scenario {id:?}")]
    UnknownScenario { query: String, id: String },
    #[error("query {query:?}: {source}")]
    Search {
        query: String,
        #[source]
        source: SearchError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Incorrect => "incorrect",
        }
    }
}

/// Every distance from one query to the collection, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub query: String,
    pub distances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Label>>,
}

impl DistanceProfile {
    /// Sorts `distances` ascending, carrying `labels` along.
    pub fn new(
        query: impl Into<String>,
        distances: Vec<f64>,
        labels: Option<Vec<Label>>,
    ) -> Result<Self, EvalError> {
        if let Some(bad) = distances.iter().find(|d| !d.is_finite()) {
            return Err(EvalError::NonFinite(*bad));
        }
        if let Some(l) = &labels {
            if l.len() != distances.len() {
                return Err(EvalError::MisalignedLabels {
                    labels: l.len(),
                    distances: distances.len(),
                });
            }
        }
        let mut order: Vec<usize> = (0..distances.len()).collect();
        order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
        Ok(Self {
            query: query.into(),
            distances: order.iter().map(|&i| distances[i]).collect(),
            labels: labels.map(|l| order.iter().map(|&i| l[i]).collect()),
        })
    }
}

/// Searches the whole collection and records every distance, labelling
/// hits whose id is in `correct_ids` when ground truth is given.
pub fn profile_for(
    collection: &Collection,
    query: &str,
    embedder: &dyn Embedder,
    correct_ids: Option<&HashSet<String>>,
) -> Result<DistanceProfile, EvalError> {
    let result = search(collection, query, collection.len().max(1), embedder).map_err(|e| {
        EvalError::Search {
            query: query.to_owned(),
            source: e,
        }
    })?;
    let distances = result.results.iter().map(|r| r.distance).collect();
    let labels = correct_ids.map(|ids| {
        result
            .results
            .iter()
            .map(|r| {
                if ids.contains(&r.id) {
                    Label::Correct
                } else {
                    Label::Incorrect
                }
            })
            .collect()
    });
    DistanceProfile::new(query, distances, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub largest_gap: f64,
    pub min_distance: f64,
    pub max_distance: f64,
    pub range: f64,
    pub std_dev: f64,
    /// Fraction in [0, 1]; 0 for a flat profile.
    pub relative_largest_gap: f64,
}

impl RetrievalReport {
    /// Derives range and relative gap from the measured quantities.
    pub fn from_measurements(
        largest_gap: f64,
        min_distance: f64,
        max_distance: f64,
        std_dev: f64,
    ) -> Self {
        let range = max_distance - min_distance;
        let relative_largest_gap = if range > 0.0 { largest_gap / range } else { 0.0 };
        Self {
            largest_gap,
            min_distance,
            max_distance,
            range,
            std_dev,
            relative_largest_gap,
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub fn population_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Summary statistics of a distance list; order of input does not matter.
pub fn metrics_from_distances(distances: &[f64]) -> Result<RetrievalReport, EvalError> {
    if distances.is_empty() {
        return Err(EvalError::EmptyProfile);
    }
    if let Some(bad) = distances.iter().find(|d| !d.is_finite()) {
        return Err(EvalError::NonFinite(*bad));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let largest_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(RetrievalReport::from_measurements(
        largest_gap,
        sorted[0],
        sorted[sorted.len() - 1],
        population_sd(&sorted),
    ))
}

pub fn retrieval_metrics(profile: &DistanceProfile) -> Result<RetrievalReport, EvalError> {
    metrics_from_distances(&profile.distances)
}

/// Mean of relative largest gaps.
pub fn mean_relative_gap(relative_gaps: &[f64]) -> Result<f64, EvalError> {
    if relative_gaps.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(mean(relative_gaps))
}

/// Average relative largest gap over a set of profiles.
pub fn arlg(profiles: &[DistanceProfile]) -> Result<f64, EvalError> {
    let gaps = profiles
        .iter()
        .map(|p| retrieval_metrics(p).map(|r| r.relative_largest_gap))
        .collect::<Result<Vec<_>, _>>()?;
    mean_relative_gap(&gaps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    AnswerLike,
    NoAnswerLike,
}

/// Midpoint of the correct-set and incorrect-set ARLGs.
pub fn arlg_baseline(correct_arlg: f64, incorrect_arlg: f64) -> f64 {
    (correct_arlg + incorrect_arlg) / 2.0
}

/// Answer-like only when strictly above the baseline.
pub fn arlg_classify(test_arlg: f64, correct_arlg: f64, incorrect_arlg: f64) -> Verdict {
    if test_arlg > arlg_baseline(correct_arlg, incorrect_arlg) {
        Verdict::AnswerLike
    } else {
        Verdict::NoAnswerLike
    }
}

/// Relative tail spread at or below which a profile counts as degenerate.
pub const DEGENERATE_SPREAD: f64 = 1e-9;

/// `(d[0] - mean(rest)) / sd(rest)` over the ascending profile, with `sd`
/// the sample standard deviation of the remaining distances.
pub fn z_score(profile: &DistanceProfile) -> Result<f64, EvalError> {
    let d = &profile.distances;
    if d.len() < 3 {
        return Err(EvalError::TooFewDistances {
            needed: 3,
            got: d.len(),
        });
    }
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let rest = &sorted[1..];
    let sd = sample_sd(rest);
    let m = mean(rest);
    // A spread at rounding level (e.g. every distance ≈ 2 for a query sharing
    // no token with the corpus) carries no signal.
    if sd <= DEGENERATE_SPREAD * m.abs().max(1.0) {
        return Err(EvalError::DegenerateProfile);
    }
    Ok((sorted[0] - m) / sd)
}

/// Whether the closest hit is an outlier at `threshold`.
pub fn z_score_validate(profile: &DistanceProfile, threshold: f64) -> Result<bool, EvalError> {
    Ok(z_score(profile)? <= threshold)
}

/// Distances from one query iteration to its correct and incorrect targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationDistances {
    pub correct: Vec<f64>,
    pub incorrect: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRuns {
    pub category: String,
    pub iterations: Vec<IterationDistances>,
}

/// Input of [`model_comparison`]: `{"categories": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRuns {
    pub categories: Vec<CategoryRuns>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelComparisonReport {
    pub mean_dist_correct: f64,
    pub mean_dist_incorrect: f64,
    pub mean_distance_difference: f64,
    pub highest_dist_correct: f64,
    pub lowest_dist_incorrect: f64,
    pub smallest_distance_difference: f64,
    pub avg_std_dev_of_scenarios: f64,
}

impl ModelComparisonReport {
    /// Fills in the two difference fields from the measured quantities.
    pub fn from_measurements(
        mean_dist_correct: f64,
        mean_dist_incorrect: f64,
        highest_dist_correct: f64,
        lowest_dist_incorrect: f64,
        avg_std_dev_of_scenarios: f64,
    ) -> Self {
        Self {
            mean_dist_correct,
            mean_dist_incorrect,
            mean_distance_difference: mean_dist_incorrect - mean_dist_correct,
            highest_dist_correct,
            lowest_dist_incorrect,
            smallest_distance_difference: lowest_dist_incorrect - highest_dist_correct,
            avg_std_dev_of_scenarios,
        }
    }
}

/// The comparison both over all distances and with the single largest
/// correct and single smallest incorrect distance removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub with_outliers: ModelComparisonReport,
    /// Absent when removing the extremes would leave a set empty.
    pub outliers_excluded: Option<ModelComparisonReport>,
}

pub fn model_comparison(runs: &ComparisonRuns) -> Result<ModelComparisonReport, EvalError> {
    if runs.categories.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for c in &runs.categories {
        if c.iterations.len() < 2 {
            return Err(EvalError::TooFewIterations {
                category: c.category.clone(),
                got: c.iterations.len(),
            });
        }
    }
    let per_category: Vec<(Vec<f64>, Vec<f64>)> = runs
        .categories
        .iter()
        .map(|c| {
            let correct = c.iterations.iter().flat_map(|i| i.correct.iter().copied());
            let incorrect = c.iterations.iter().flat_map(|i| i.incorrect.iter().copied());
            (correct.collect(), incorrect.collect())
        })
        .collect();
    compare(&runs.categories, &per_category)
}

fn compare(
    categories: &[CategoryRuns],
    per_category: &[(Vec<f64>, Vec<f64>)],
) -> Result<ModelComparisonReport, EvalError> {
    let correct: Vec<f64> = per_category.iter().flat_map(|c| c.0.iter().copied()).collect();
    let incorrect: Vec<f64> = per_category.iter().flat_map(|c| c.1.iter().copied()).collect();
    if correct.is_empty() {
        return Err(EvalError::MissingLabels("no correct distances".into()));
    }
    if incorrect.is_empty() {
        return Err(EvalError::MissingLabels("no incorrect distances".into()));
    }
    if let Some(bad) = correct.iter().chain(&incorrect).find(|d| !d.is_finite()) {
        return Err(EvalError::NonFinite(*bad));
    }
    let mut sds = Vec::with_capacity(per_category.len());
    for (cat, (c, _)) in categories.iter().zip(per_category) {
        if c.is_empty() {
            return Err(EvalError::MissingLabels(format!(
                "category {:?} has no correct distances",
                cat.category
            )));
        }
        sds.push(population_sd(c));
    }
    Ok(ModelComparisonReport::from_measurements(
        mean(&correct),
        mean(&incorrect),
        correct.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        incorrect.iter().copied().fold(f64::INFINITY, f64::min),
        mean(&sds),
    ))
}

pub fn model_comparison_with_outliers(runs: &ComparisonRuns) -> Result<ModelComparison, EvalError> {
    let with_outliers = model_comparison(runs)?;
    let mut per_category: Vec<(Vec<f64>, Vec<f64>)> = runs
        .categories
        .iter()
        .map(|c| {
            (
                c.iterations.iter().flat_map(|i| i.correct.clone()).collect(),
                c.iterations.iter().flat_map(|i| i.incorrect.clone()).collect(),
            )
        })
        .collect();
    remove_extreme(&mut per_category, |c| &mut c.0, with_outliers.highest_dist_correct);
    remove_extreme(&mut per_category, |c| &mut c.1, with_outliers.lowest_dist_incorrect);
    Ok(ModelComparison {
        with_outliers,
        outliers_excluded: compare(&runs.categories, &per_category).ok(),
    })
}

fn remove_extreme(
    per_category: &mut [(Vec<f64>, Vec<f64>)],
    pick: impl Fn(&mut (Vec<f64>, Vec<f64>)) -> &mut Vec<f64>,
    value: f64,
) {
    for c in per_category.iter_mut() {
        let set = pick(c);
        if let Some(pos) = set.iter().position(|&d| d == value) {
            set.remove(pos);
            return;
        }
    }
}

/// Plot-ready CSV: `query,rank,distance,label`, rank starting at 1.
pub fn distance_curves(profiles: &[DistanceProfile]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "rank", "distance", "label"])
        .expect("in-memory write");
    for p in profiles {
        for (i, d) in p.distances.iter().enumerate() {
            let label = p
                .labels
                .as_ref()
                .map_or("", |l| l[i].as_str());
            w.write_record([
                p.query.as_str(),
                &(i + 1).to_string(),
                &d.to_string(),
                label,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Which calibration group a query belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuerySet {
    /// Queries known to have answers in the collection.
    Correct,
    /// Queries known to have none.
    Incorrect,
    /// Queries under evaluation.
    Test,
}

/// One entry of a queries file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub query: String,
    #[serde(default = "default_set")]
    pub set: QuerySet,
}

fn default_set() -> QuerySet {
    QuerySet::Test
}

/// One ground-truth entry: the scenarios that answer `query`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthEntry {
    pub query: String,
    pub correct_ids: Vec<String>,
}

/// Indexes ground truth by query, rejecting ids the collection lacks.
pub fn truth_index(
    truth: &[TruthEntry],
    collection: &Collection,
) -> Result<HashMap<String, HashSet<String>>, EvalError> {
    let mut out: HashMap<String, HashSet<String>> = HashMap::new();
    for t in truth {
        for id in &t.correct_ids {
            if collection.get(id).is_none() {
                return Err(EvalError::UnknownScenario {
                    query: t.query.clone(),
                    id: id.clone(),
                });
            }
        }
        out.entry(t.query.clone())
            .or_default()
            .extend(t.correct_ids.iter().cloned());
    }
    Ok(out)
}
