//! End-to-end runs over the synthetic demo corpus.

use std::collections::HashSet;

use genius_core::demo::{self, ABSENT_QUERIES, CATEGORIES};
use genius_core::describe::{load_rules, StubVision, TemplateCombiner};
use genius_core::embed::{tokenize, HashEmbedder};
use genius_core::evaluate::{
    profile_for, retrieval_metrics, z_score, z_score_validate, EvalError, DEFAULT_Z_THRESHOLD,
};
use genius_core::index::{build_collection, Pipeline};
use genius_core::ingest::{load_log, segment, ScenarioFile};
use genius_core::retrieve::search;
use genius_core::store::Collection;

fn demo_collection() -> (tempfile::TempDir, Collection) {
    let dir = tempfile::tempdir().unwrap();
    let layout = demo::write_corpus(dir.path()).unwrap();
    let mut files: Vec<ScenarioFile> = Vec::new();
    for m in &layout.manifests {
        let log = load_log(m).unwrap();
        for s in segment(&log, demo::WINDOW_S).unwrap() {
            files.push(log.scenario_file(&s));
        }
    }
    assert_eq!(files.len(), 80);
    let rules = load_rules(&layout.rules).unwrap();
    let vision = StubVision::from_file(&layout.vision).unwrap();
    let embedder = HashEmbedder::default();
    let pipeline = Pipeline {
        rules: &rules,
        vision: &vision,
        combiner: &TemplateCombiner,
        embedder: &embedder,
        workers: 4,
    };
    let c = build_collection("demo", &files, &pipeline).unwrap();
    (dir, c)
}

#[test]
fn category_queries_rank_their_scenarios_first() {
    let (_dir, c) = demo_collection();
    let e = HashEmbedder::default();
    for cat in &CATEGORIES {
        let r = search(&c, cat.query, 10, &e).unwrap();
        let expected: HashSet<String> = (0..10).map(|i| demo::scenario_id(cat, i)).collect();
        let got: HashSet<String> = r.results.iter().map(|h| h.id.clone()).collect();
        assert_eq!(got, expected, "{}", cat.query);
    }
}

#[test]
fn absent_queries_share_only_function_words() {
    let (_dir, c) = demo_collection();
    let corpus: HashSet<String> = c
        .records()
        .iter()
        .flat_map(|r| tokenize(&r.description).collect::<Vec<_>>())
        .collect();
    let allowed: HashSet<&str> = ["driving", "a", "at", "the"].into();
    for q in ABSENT_QUERIES {
        for t in tokenize(q) {
            assert!(!corpus.contains(&t) || allowed.contains(t.as_str()), "{q}: {t}");
        }
    }
}

#[test]
fn correct_queries_separate_from_absent_ones() {
    let (_dir, c) = demo_collection();
    let e = HashEmbedder::default();
    let mut rel = Vec::new();
    let mut flagged = 0;
    for cat in &CATEGORIES {
        let p = profile_for(&c, cat.query, &e, None).unwrap();
        rel.push(retrieval_metrics(&p).unwrap().relative_largest_gap);
        flagged += usize::from(z_score_validate(&p, DEFAULT_Z_THRESHOLD).unwrap());
    }
    let mean_rel = rel.iter().sum::<f64>() / rel.len() as f64;
    assert!(flagged >= 7, "{flagged} of 8 correct queries validated");
    for q in ABSENT_QUERIES {
        let p = profile_for(&c, q, &e, None).unwrap();
        let m = retrieval_metrics(&p).unwrap();
        assert!(mean_rel > m.relative_largest_gap, "{q}: {} vs {mean_rel}", m.relative_largest_gap);
        assert!(!z_score_validate(&p, DEFAULT_Z_THRESHOLD).unwrap(), "{q}: z = {:?}", z_score(&p));
    }
}

#[test]
fn out_of_vocabulary_query_is_degenerate() {
    let (_dir, c) = demo_collection();
    let e = HashEmbedder::default();
    let p = profile_for(&c, "skiing mountain", &e, None).unwrap();
    assert!(matches!(z_score(&p), Err(EvalError::DegenerateProfile)));
}
