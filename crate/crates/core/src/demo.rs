//! Reproducible synthetic corpus: eight five-minute drives, one per scenario
//! category, each cut into ten 30 s scenarios (80 in total).
//!
//! Every category has its own boolean environment signal, rule template and
//! camera vocabulary, with no words shared between categories. Speed and
//! position signals are noisy and identical in form across categories.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::evaluate::{QuerySet, QuerySpec, TruthEntry};

pub const SEED: u64 = 2024;
pub const LOG_SECONDS: usize = 300;
pub const SAMPLE_HZ: usize = 2;
pub const WINDOW_S: f64 = 30.0;
pub const ITERATIONS: usize = 10;
const EPOCH_START: f64 = 1_717_200_000.0;

pub struct Category {
    pub key: &'static str,
    pub signal: &'static str,
    pub condition: &'static str,
    pub camera: [&'static str; 5],
    pub query: &'static str,
}

pub const CATEGORIES: [Category; 8] = [
    Category {
        key: "snow",
        signal: "env/snow_on_road",
        condition: "snowy road surface",
        camera: [
            "snowy highway in sweden",
            "snow covered highway with frozen pine trees",
            "snowbanks along snowy swedish highway",
            "white snowfall over the highway",
            "icy snowy highway lanes in sweden",
        ],
        query: "Snowy highway in Sweden",
    },
    Category {
        key: "bridge",
        signal: "env/under_bridge",
        condition: "passing under bridge",
        camera: [
            "concrete bridge overhead",
            "steel bridge girders above",
            "shadow beneath bridge deck",
            "bridge pillars beside",
            "overpass bridge spanning across",
        ],
        query: "Driving under bridge",
    },
    Category {
        key: "accident",
        signal: "env/accident_ahead",
        condition: "accident ahead",
        camera: [
            "crashed wreck blocking lanes after accident",
            "accident scene flashing emergency lights",
            "collision debris from accident",
            "damaged wreck towed after accident",
            "police cones around accident",
        ],
        query: "Car accident",
    },
    Category {
        key: "lane_change",
        signal: "env/lane_change",
        condition: "changed lane",
        camera: [
            "merging into adjacent lane",
            "lane markings crossed while overtaking",
            "changed lane to overtake truck",
            "lane shift toward left lane",
            "indicator blinking during lane change",
        ],
        query: "Car changed lane",
    },
    Category {
        key: "tunnel",
        signal: "env/in_tunnel",
        condition: "inside tunnel",
        camera: [
            "tunnel entrance ahead",
            "dim tunnel walls lit by lamps",
            "long tunnel tube",
            "tunnel exit glowing",
            "tiled tunnel ceiling",
        ],
        query: "Tunnel entrance",
    },
    Category {
        key: "roundabout",
        signal: "env/in_roundabout",
        condition: "circling roundabout",
        camera: [
            "roundabout island with yield signs",
            "circular roundabout junction",
            "entering busy roundabout",
            "roundabout exit ramp",
            "grass roundabout centre",
        ],
        query: "Roundabout",
    },
    Category {
        key: "rain",
        signal: "env/heavy_rain",
        condition: "heavy rain",
        camera: [
            "rain streaks on windshield",
            "wet asphalt reflecting rain",
            "wipers sweeping heavy rain",
            "puddles spraying rain",
            "rain soaked dark road",
        ],
        query: "Heavy rain on wet road",
    },
    Category {
        key: "pedestrians",
        signal: "env/pedestrians_near",
        condition: "pedestrians nearby",
        camera: [
            "pedestrians crossing zebra crosswalk",
            "busy pedestrians sidewalk downtown",
            "pedestrian waiting near crosswalk",
            "crowd of pedestrians downtown",
            "children pedestrians crossing street",
        ],
        query: "Pedestrians crossing street",
    },
];

/// Queries whose words appear nowhere in the corpus except generic ones.
pub const ABSENT_QUERIES: [&str; 2] = [
    "driving through a desert sandstorm",
    "boarding a ferry at the harbour",
];

/// Broad queries matching every scenario's generic wording.
pub const BROAD_QUERIES: [&str; 2] = ["driving at a speed", "vehicle speed average"];

pub const SPEED_TEMPLATE: &str = "driving at a speed between {min} and {max} km/h";

pub fn log_id(category: &Category) -> String {
    format!("drive-{}", category.key.replace('_', "-"))
}

pub fn scenario_id(category: &Category, iteration: usize) -> String {
    format!("{}#{iteration}", log_id(category))
}

/// Paths of the files [`write_corpus`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoLayout {
    pub root: PathBuf,
    pub manifests: Vec<PathBuf>,
    pub rules: PathBuf,
    pub vision: PathBuf,
    pub queries: PathBuf,
    pub truth: PathBuf,
}

impl DemoLayout {
    pub fn manifest_glob(&self) -> String {
        format!("{}/logs/*/manifest.json", self.root.display())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn rules() -> serde_json::Value {
    let mut rules = vec![
        json!({
            "rule_id": "speed",
            "kind": "numeric_summary",
            "signal": "vehicle/speed_kph",
            "template": SPEED_TEMPLATE,
        }),
        json!({
            "rule_id": "lka_left_emergency",
            "kind": "rising_edge",
            "signal": "lka/intervention_side",
            "params": {"guards": ["lka/enabled", "lka/emergency_enabled"]},
            "template": "{count} left side emergency lka intervention",
        }),
    ];
    for c in &CATEGORIES {
        rules.push(json!({
            "rule_id": c.key,
            "kind": "boolean_condition",
            "signal": c.signal,
            "template": c.condition,
        }));
    }
    serde_json::Value::Array(rules)
}

/// Writes the corpus under `root`. Output bytes depend only on [`SEED`].
pub fn write_corpus(root: &Path) -> io::Result<DemoLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut manifests = Vec::new();
    let mut vision = BTreeMap::new();
    for (ci, category) in CATEGORIES.iter().enumerate() {
        let id = log_id(category);
        let dir = root.join("logs").join(&id);
        let frames = dir.join("frames");
        fs::create_dir_all(&frames)?;
        let start = EPOCH_START + ci as f64 * 3600.0;
        write_signals(&dir.join("signals.csv"), ci, start, &mut rng)?;
        for i in 0..ITERATIONS {
            let sid = scenario_id(category, i);
            // Placeholder frame; the stub describer never decodes it.
            fs::write(frames.join(format!("{sid}.jpg")), [0xff, 0xd8, 0xff, 0xd9])?;
            let camera = format!(
                "{}, {}",
                category.camera[i % 5],
                category.camera[(i + 2) % 5]
            );
            vision.insert(sid, camera);
        }
        let utc = |t: f64| {
            chrono::DateTime::from_timestamp(t as i64, 0)
                .expect("valid timestamp")
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        };
        let manifest = json!({
            "vehicle": format!("demo-vehicle-{}", ci % 3 + 1),
            "log_id": id,
            "utc_start": utc(start),
            "utc_end": utc(start + LOG_SECONDS as f64),
            "signals_file": "signals.csv",
            "frames_dir": "frames",
            "link_template": "https://viz.example.invalid/scenario/{scenario_id}",
        });
        let path = dir.join("manifest.json");
        write_json(&path, &manifest)?;
        manifests.push(path);
    }

    let rules_path = root.join("rules.json");
    write_json(&rules_path, &rules())?;
    let vision_path = root.join("vision.json");
    write_json(&vision_path, &vision)?;
    let queries_path = root.join("queries.json");
    write_json(&queries_path, &queries())?;
    let truth_path = root.join("truth.json");
    write_json(&truth_path, &truth())?;
    Ok(DemoLayout {
        root: root.to_path_buf(),
        manifests,
        rules: rules_path,
        vision: vision_path,
        queries: queries_path,
        truth: truth_path,
    })
}

pub fn queries() -> Vec<QuerySpec> {
    let correct = CATEGORIES.iter().map(|c| QuerySpec {
        query: c.query.into(),
        set: QuerySet::Correct,
    });
    let incorrect = ABSENT_QUERIES.iter().map(|q| QuerySpec {
        query: (*q).into(),
        set: QuerySet::Incorrect,
    });
    let test = BROAD_QUERIES.iter().map(|q| QuerySpec {
        query: (*q).into(),
        set: QuerySet::Test,
    });
    correct.chain(incorrect).chain(test).collect()
}

pub fn truth() -> Vec<TruthEntry> {
    let correct = CATEGORIES.iter().map(|c| TruthEntry {
        query: c.query.into(),
        correct_ids: (0..ITERATIONS).map(|i| scenario_id(c, i)).collect(),
    });
    let absent = ABSENT_QUERIES.iter().map(|q| TruthEntry {
        query: (*q).into(),
        correct_ids: Vec::new(),
    });
    correct.chain(absent).collect()
}

fn write_signals(path: &Path, category: usize, start: f64, rng: &mut ChaCha8Rng) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_path(path)?;
    let mut header = vec![
        "timestamp".to_string(),
        "vehicle/speed_kph".into(),
        "gnss/latitude_nanodegrees".into(),
        "gnss/longitude_nanodegrees".into(),
        "lka/intervention_side".into(),
        "lka/enabled".into(),
        "lka/emergency_enabled".into(),
    ];
    header.extend(CATEGORIES.iter().map(|c| c.signal.to_string()));
    w.write_record(&header)?;

    let rows = LOG_SECONDS * SAMPLE_HZ;
    let rows_per_window = WINDOW_S as usize * SAMPLE_HZ;
    let cruise: i64 = rng.random_range(40..110);
    let mut lat: i64 = 57_000_000_000 + rng.random_range(0..900_000_000);
    let mut lon: i64 = 11_000_000_000 + rng.random_range(0..900_000_000);
    let is_lane_change = CATEGORIES[category].key == "lane_change";
    for r in 0..rows {
        let t = start + r as f64 / SAMPLE_HZ as f64;
        let speed = cruise + rng.random_range(-3..=3);
        lat += rng.random_range(0..4_000);
        lon += rng.random_range(0..6_000);
        let in_window = r % rows_per_window;
        let lka_side = if is_lane_change && (20..26).contains(&in_window) { 1 } else { 0 };
        let mut record = vec![
            format!("{t:.1}"),
            speed.to_string(),
            lat.to_string(),
            lon.to_string(),
            lka_side.to_string(),
            "1".into(),
            "1".into(),
        ];
        record.extend((0..CATEGORIES.len()).map(|c| if c == category { "1" } else { "0" }.to_string()));
        w.write_record(&record)?;
    }
    w.flush()
}
