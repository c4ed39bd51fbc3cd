//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Run with `cargo test -p genius-cli --test acceptance` (add `--release`
//! for representative timings).

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use genius_core::demo::{self, ABSENT_QUERIES, CATEGORIES};
use genius_core::embed::{batch_embed, squared_distance, Embedder, EmbeddingVector, HashEmbedder};
use genius_core::evaluate::{
    arlg, arlg_classify, mean_relative_gap, DistanceProfile, ModelComparisonReport,
    RetrievalReport, Verdict,
};
use genius_core::retrieve::search;
use genius_core::store::{Collection, EmbeddedRecord, RecordMetadata, StoreError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check((got - want).abs() <= tol, || format!("{name} = {got}, expected {want} ± {tol}"))
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(u) = EmbeddingVector::normalized(v) {
            return u.into_inner();
        }
    }
}

fn record(i: usize, vector: Vec<f64>) -> EmbeddedRecord {
    EmbeddedRecord {
        id: format!("s{i:06}"),
        vector: EmbeddingVector::from_unit(vector).expect("unit vector"),
        description: String::new(),
        metadata: RecordMetadata {
            vehicle: "v".into(),
            log_id: "l".into(),
            window_start: i as f64,
            link: String::new(),
        },
    }
}

fn random_collection(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Collection {
    let mut c = Collection::new("random", "random", dim);
    for i in 0..count {
        c.add(record(i, random_unit(rng, dim))).unwrap();
    }
    c
}

// 1. Retrieval metrics reproduce the reference per-query values.
fn retrieval_metrics() -> Outcome {
    let cases = [
        ((0.09962, 1.226, 1.512, 0.03688), 0.2858, 0.349),
        ((0.2996, 0.7712, 1.367, 0.1031), 0.5956, 0.503),
    ];
    let mut seen = Vec::new();
    for ((lg, min, max, sd), range, rel) in cases {
        let r = RetrievalReport::from_measurements(lg, min, max, sd);
        close("range", r.range, range, 5e-4)?;
        close("relative largest gap", r.relative_largest_gap, rel, 1e-3)?;
        seen.push(format!("range {:.4}, rel {:.1}%", r.range, 100.0 * r.relative_largest_gap));
    }
    Ok(seen.join("; "))
}

// 2. ARLG baseline and classification.
fn arlg_baseline() -> Outcome {
    let base = mean_relative_gap(&[0.266, 0.111]).map_err(|e| e.to_string())?;
    close("baseline", base, 0.1885, 5e-4)?;
    // Same value through profiles whose relative gaps are 0.266 and 0.111.
    // 0, rel, then steps shorter than rel up to 1: largest gap rel, range 1.
    let profile = |q: &str, rel: f64| {
        let steps = ((1.0 - rel) / rel).ceil() as usize + 1;
        let mut d = vec![0.0];
        d.extend((0..=steps).map(|k| rel + (1.0 - rel) * k as f64 / steps as f64));
        DistanceProfile::new(q, d, None).map_err(|e| e.to_string())
    };
    let via_profiles = arlg(&[profile("a", 0.266)?, profile("b", 0.111)?]).map_err(|e| e.to_string())?;
    close("baseline via profiles", via_profiles, 0.1885, 5e-4)?;
    let verdict = arlg_classify(0.145, 0.266, 0.111);
    check(verdict == Verdict::NoAnswerLike, || format!("0.145 classified {verdict:?}"))?;
    Ok(format!("baseline {:.2}%, 14.5% is no-answer-like", 100.0 * base))
}

// 3. Model comparison differences.
fn model_comparison() -> Outcome {
    let models = [
        ("gemma-7b", (1.081, 1.419, 1.133, 1.309, 0.028), 0.338, 0.176),
        ("mistral-7b", (1.093, 1.433, 1.147, 1.303, 0.033), 0.340, 0.156),
    ];
    let mut seen = Vec::new();
    for (name, (mc, mi, hc, li, sd), mean_diff, smallest) in models {
        let r = ModelComparisonReport::from_measurements(mc, mi, hc, li, sd);
        close(&format!("{name} mean difference"), r.mean_distance_difference, mean_diff, 1e-3)?;
        close(&format!("{name} smallest difference"), r.smallest_distance_difference, smallest, 1e-3)?;
        seen.push(format!(
            "{name} {:.3}/{:.3}",
            r.mean_distance_difference, r.smallest_distance_difference
        ));
    }
    Ok(seen.join("; "))
}

// 4. Top-n matches a full-sort oracle.
fn knn_oracle() -> Outcome {
    const DIM: usize = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = random_collection(&mut rng, 1000, DIM);
    let mut checked = 0;
    for _ in 0..50 {
        let q = random_unit(&mut rng, DIM);
        let mut oracle: Vec<(f64, usize)> = c
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.vector.as_slice().iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for n in [1, 10, 100] {
            let hits = c.query(&q, n).map_err(|e| e.to_string())?;
            check(hits.len() == n, || format!("n={n}: {} hits", hits.len()))?;
            for (h, &(d, i)) in hits.iter().zip(&oracle) {
                check(h.record.id == c.records()[i].id, || {
                    format!("n={n}: got {}, oracle {}", h.record.id, c.records()[i].id)
                })?;
                close("distance", h.distance, d, 1e-12)?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} rankings identical to the oracle"))
}

fn genius(dir: &Path, args: &[&str]) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_genius"))
        .current_dir(dir)
        .env_remove("GENIUS_CONFIG")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "genius {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&o.stdout).into_owned())
}

/// demo → ingest → index inside `dir`, writing `store`.
fn build_demo_store(dir: &Path, store: &str) -> Result<(), String> {
    genius(dir, &["demo", "--out", "demo"])?;
    genius(dir, &["ingest", "--manifest", "demo/logs/*/manifest.json", "--out", "scen"])?;
    genius(
        dir,
        &["index", "--scenarios", "scen", "--rules", "demo/rules.json", "--store", store,
          "--vision", "stub", "--vision-map", "demo/vision.json"],
    )?;
    Ok(())
}

// 5. Demo corpus end to end.
fn demo_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    build_demo_store(d, "store.jsonl")?;
    let c = Collection::load(&d.join("store.jsonl")).map_err(|e| e.to_string())?;
    check(c.len() == 80, || format!("{} scenarios indexed", c.len()))?;
    let e = HashEmbedder::default();
    for cat in &CATEGORIES {
        let r = search(&c, cat.query, 10, &e).map_err(|e| e.to_string())?;
        let want: HashSet<String> = (0..demo::ITERATIONS).map(|i| demo::scenario_id(cat, i)).collect();
        let got: HashSet<String> = r.results.into_iter().map(|h| h.id).collect();
        check(got == want, || format!("top-10 for {:?} is not its category", cat.query))?;
    }

    genius(
        d,
        &["eval", "retrieval", "--store", "store.jsonl", "--queries", "demo/queries.json",
          "--truth", "demo/truth.json", "--out", "report.json"],
    )?;
    let text = std::fs::read_to_string(d.join("report.json")).map_err(|e| e.to_string())?;
    let report: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let queries = report["queries"].as_array().ok_or("report has no queries")?;
    let rel = |q: &Value| q["relative_largest_gap"].as_f64().unwrap_or(f64::NAN);
    let correct: Vec<&Value> = queries.iter().filter(|q| q["set"] == "correct").collect();
    check(correct.len() == CATEGORIES.len(), || format!("{} correct queries", correct.len()))?;
    let mean = correct.iter().map(|q| rel(q)).sum::<f64>() / correct.len() as f64;
    let validated = correct.iter().filter(|q| q["has_answer"] == true).count();
    check(validated >= 7, || format!("only {validated}/8 category queries pass the Z-score test"))?;
    for absent in ABSENT_QUERIES {
        let q = queries
            .iter()
            .find(|q| q["query"] == absent)
            .ok_or_else(|| format!("{absent:?} missing from report"))?;
        check(mean > rel(q), || format!("mean rel. LG {mean:.3} <= {:.3} for {absent:?}", rel(q)))?;
        check(q["has_answer"] != true, || format!("{absent:?} passes the Z-score test"))?;
    }
    Ok(format!("mean rel. LG {mean:.3}, {validated}/8 Z-validated, absent queries rejected"))
}

// 6. Deterministic, round-tripping, corruption-detecting store.
fn store_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    build_demo_store(a.path(), "store.jsonl")?;
    build_demo_store(b.path(), "store.jsonl")?;
    let first = std::fs::read(a.path().join("store.jsonl")).map_err(|e| e.to_string())?;
    let second = std::fs::read(b.path().join("store.jsonl")).map_err(|e| e.to_string())?;
    check(first == second, || "two index runs produced different bytes".into())?;

    let c = Collection::from_bytes(&first).map_err(|e| e.to_string())?;
    let copy = a.path().join("copy.jsonl");
    c.save(&copy).map_err(|e| e.to_string())?;
    let back = Collection::load(&copy).map_err(|e| e.to_string())?;
    check(back == c, || "load(save(c)) != c".into())?;
    check(back.to_bytes() == first, || "re-saved bytes differ".into())?;

    let mut cuts = vec![first.len() - 1, first.len() / 2, first.len() / 3, 10];
    cuts.dedup();
    for cut in &cuts {
        match Collection::from_bytes(&first[..*cut]) {
            Err(StoreError::CorruptStore { .. }) => {}
            other => return Err(format!("truncated at {cut}: {:?}", other.map(|c| c.len()))),
        }
    }
    Ok(format!("{} bytes identical across runs; {} truncations rejected", first.len(), cuts.len()))
}

const WORDS: &[&str] = &[
    "tunnel", "snow", "bridge", "highway", "rain", "night", "city", "lane", "speed", "brake",
    "driving", "slow", "fast", "the", "a", "under", "through", "wet", "dry", "fog",
];

fn random_words(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let n = rng.random_range(1..12);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect()
}

// 7. Invariants over random inputs.
fn invariants() -> Outcome {
    const CASES: usize = 1000;
    const DIM: usize = genius_core::embed::DEFAULT_DIM;
    let e = HashEmbedder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let embed = |t: &str| e.embed(t).map(EmbeddingVector::into_inner).map_err(|e| e.to_string());

    for _ in 0..CASES {
        let v = embed(&random_words(&mut rng).join(" "))?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        close("norm", norm, 1.0, 1e-9)?;
    }

    for _ in 0..CASES {
        let a = embed(&random_words(&mut rng).join(" "))?;
        let b = embed(&random_words(&mut rng).join(" "))?;
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        close("d² identity", squared_distance(&a, &b), 2.0 - 2.0 * dot, 1e-9)?;
    }

    for _ in 0..CASES {
        let mut words = random_words(&mut rng);
        let base = embed(&words.join(" "))?;
        let k = rng.random_range(2..6);
        let repeated = vec![words.join(" "); k].join(" ");
        let scaled = embed(&repeated)?;
        let drift = base.iter().zip(&scaled).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        check(drift <= 1e-12, || format!("repeating text {k}× moved the vector by {drift}"))?;
        for i in (1..words.len()).rev() {
            words.swap(i, rng.random_range(0..=i));
        }
        let permuted = embed(&words.join(" "))?;
        check(permuted == base, || "token order changed the embedding".into())?;
    }

    // Batch embedding and insertion order do not change what a query finds.
    let texts: Vec<String> = (0..CASES).map(|_| random_words(&mut rng).join(" ")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let batch = batch_embed(&refs, &e).map_err(|e| e.to_string())?;
    for (t, v) in texts.iter().zip(&batch) {
        check(embed(t)? == v.as_slice(), || format!("batch differs for {t:?}"))?;
    }

    let mut c = Collection::new("inv", e.id(), DIM);
    for (i, v) in batch.iter().take(200).enumerate() {
        c.add(record(i, v.as_slice().to_vec())).map_err(|e| e.to_string())?;
    }
    for _ in 0..CASES {
        let q = embed(&random_words(&mut rng).join(" "))?;
        let n = rng.random_range(1..40);
        let short = c.query(&q, n).map_err(|e| e.to_string())?;
        let long = c.query(&q, n + 1).map_err(|e| e.to_string())?;
        check(long.len() == short.len() + 1, || "longer query returned too few hits".into())?;
        for (s, l) in short.iter().zip(&long) {
            check(s.record.id == l.record.id && s.distance == l.distance, || {
                format!("top-{n} is not a prefix of top-{}", n + 1)
            })?;
        }
        check(long.windows(2).all(|w| w[0].distance <= w[1].distance), || "hits not ascending".into())?;
    }
    Ok(format!("5 suites × {CASES} cases"))
}

// 8. Brute-force latency at 100k vectors.
fn latency_100k() -> Outcome {
    const DIM: usize = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = random_collection(&mut rng, 100_000, DIM);
    let q = random_unit(&mut rng, DIM);
    let start = Instant::now();
    let hits = c.query(&q, 10).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(hits.len() == 10, || format!("{} hits", hits.len()))?;
    check(took < Duration::from_secs(1), || format!("query took {took:?}"))?;
    Ok(format!("top-10 over 100000 in {:.1} ms", took.as_secs_f64() * 1e3))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("retrieval metrics", retrieval_metrics, Duration::from_secs(1)),
        ("ARLG baseline", arlg_baseline, Duration::from_secs(1)),
        ("model comparison", model_comparison, Duration::from_secs(1)),
        ("kNN matches oracle", knn_oracle, Duration::from_secs(10)),
        ("demo end to end", demo_end_to_end, Duration::from_secs(30)),
        ("store determinism", store_determinism, Duration::from_secs(10)),
        ("invariants", invariants, Duration::from_secs(60)),
        ("100k latency", latency_100k, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let took = start.elapsed();
                if took > budget {
                    Err(format!("{detail}; took {took:.2?}, budget {budget:?}"))
                } else {
                    Ok(detail)
                }
            });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} ({took:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why} ({took:.2?})", i + 1)
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
