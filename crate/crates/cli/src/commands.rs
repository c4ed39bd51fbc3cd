use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use genius_core::demo;
use genius_core::describe::{
    load_rules, HttpCombiner, HttpVision, NoVision, StubVision, TemplateCombiner, TextCombiner,
    VisionDescriber, DEFAULT_COMBINER_PROMPT, DEFAULT_VISION_PROMPT,
};
use genius_core::embed::{Embedder, HashEmbedder, HttpEmbedder};
use genius_core::index::{build_collection, load_scenario_dir, Pipeline};
use genius_core::ingest::{load_log, segment, DEFAULT_WINDOW_S};
use genius_core::retrieve::{search, QueryResult, DEFAULT_RESULT_COUNT};
use genius_core::store::Collection;
use genius_core::HttpSettings;

use crate::config::Config;
use crate::{
    CombinerKind, DemoArgs, EmbedderArgs, EmbedderKind, Failure, Format, IndexArgs, IngestArgs,
    QueryArgs, ServeArgs, VisionKind,
};

/// Endpoint for an `http` adapter choice; missing is a usage error.
fn endpoint(config: &Config, flag: Option<String>, key: &str, adapter: &str) -> Result<String, Failure> {
    config.pick(flag, key)?.ok_or_else(|| {
        Failure::Usage(format!(
            "--{adapter} http needs --{}",
            key.replace('_', "-")
        ))
    })
}

pub(crate) fn build_embedder(a: &EmbedderArgs, config: &Config) -> Result<Arc<dyn Embedder>, Failure> {
    match config.pick_enum(a.embedder, "embedder", EmbedderKind::Hash)? {
        EmbedderKind::Hash => Ok(Arc::new(HashEmbedder::default())),
        EmbedderKind::Http => {
            let url = endpoint(config, a.embedder_endpoint.clone(), "embedder_endpoint", "embedder")?;
            let mut e = HttpEmbedder::new(HttpSettings::new(url));
            if let Some(dim) = config.pick(a.embedder_dim, "embedder_dim")? {
                e = e.with_dim(dim);
            }
            Ok(Arc::new(e))
        }
    }
}

pub(crate) fn load_store(path: &Path) -> Result<Collection, Failure> {
    Collection::load(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json_line(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

pub fn demo(a: DemoArgs) -> Result<(), Failure> {
    let layout = demo::write_corpus(&a.out)
        .map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    println!(
        "wrote {} logs, rules, vision map, queries and truth under {}",
        layout.manifests.len(),
        layout.root.display()
    );
    println!("manifests: {}", layout.manifest_glob());
    Ok(())
}

pub fn ingest(a: IngestArgs, config: &Config) -> Result<(), Failure> {
    let window = config.pick_or(a.window, "window", DEFAULT_WINDOW_S)?;
    if !(window.is_finite() && window > 0.0) {
        return Err(Failure::Usage(format!("--window must be positive, got {window}")));
    }
    let pattern = glob::glob(&a.manifest)
        .map_err(|e| Failure::Usage(format!("bad --manifest pattern {:?}: {e}", a.manifest)))?;
    let mut manifests = pattern
        .collect::<Result<Vec<PathBuf>, _>>()
        .map_err(|e| Failure::Data(e.to_string()))?;
    manifests.sort();
    if manifests.is_empty() {
        return Err(Failure::Data(format!("no manifest matches {:?}", a.manifest)));
    }

    // Read everything first so a bad log leaves the output directory alone.
    let mut files = Vec::new();
    for m in &manifests {
        let log = load_log(m)?;
        for s in segment(&log, window)? {
            files.push(log.scenario_file(&s));
        }
    }
    fs::create_dir_all(&a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    for f in &files {
        write_json_line(&a.out.join(format!("{}.json", f.scenario.scenario_id)), f)?;
    }
    println!("{} scenarios from {} logs", files.len(), manifests.len());
    Ok(())
}

pub fn index(a: IndexArgs, config: &Config) -> Result<(), Failure> {
    let scenarios: PathBuf = config.require(a.scenarios, "scenarios")?;
    let rules_path: PathBuf = config.require(a.rules, "rules")?;
    let store: PathBuf = config.require(a.store, "store")?;
    let embedder = build_embedder(&a.embedder, config)?;

    let combiner: Box<dyn TextCombiner> =
        match config.pick_enum(a.combiner, "combiner", CombinerKind::Template)? {
            CombinerKind::Template => Box::new(TemplateCombiner),
            CombinerKind::Http => {
                let url = endpoint(config, a.combiner_endpoint, "combiner_endpoint", "combiner")?;
                let prompt = config.pick_or(a.combiner_prompt, "combiner_prompt", DEFAULT_COMBINER_PROMPT.to_owned())?;
                Box::new(HttpCombiner::new(HttpSettings::new(url), prompt))
            }
        };
    let vision: Box<dyn VisionDescriber> = match config.pick_enum(a.vision, "vision", VisionKind::None)? {
        VisionKind::None => Box::new(NoVision),
        VisionKind::Stub => {
            let map: PathBuf = config
                .pick(a.vision_map, "vision_map")?
                .ok_or_else(|| Failure::Usage("--vision stub needs --vision-map".into()))?;
            Box::new(StubVision::from_file(&map)?)
        }
        VisionKind::Http => {
            let url = endpoint(config, a.vision_endpoint, "vision_endpoint", "vision")?;
            let prompt = config.pick_or(a.vision_prompt, "vision_prompt", DEFAULT_VISION_PROMPT.to_owned())?;
            Box::new(HttpVision::new(HttpSettings::new(url), prompt))
        }
    };
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get() as u64);
    let workers = config.pick_or(a.workers, "workers", default_workers)?;
    if workers == 0 {
        return Err(Failure::Usage("workers must be at least 1".into()));
    }

    let rules = load_rules(&rules_path)?;
    let files = load_scenario_dir(&scenarios)?;
    let name = store
        .file_stem()
        .map_or_else(|| "scenarios".to_owned(), |s| s.to_string_lossy().into_owned());
    let pipeline = Pipeline {
        rules: &rules,
        vision: vision.as_ref(),
        combiner: combiner.as_ref(),
        embedder: embedder.as_ref(),
        workers: workers as usize,
    };
    let collection = build_collection(&name, &files, &pipeline)?;
    collection
        .save(&store)
        .map_err(|e| Failure::Data(format!("{}: {e}", store.display())))?;
    println!("indexed {} scenarios into {}", collection.len(), store.display());
    Ok(())
}

fn table(result: &QueryResult) -> String {
    const WIDTH: usize = 72;
    let id_width = result.results.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
    let mut out = format!("{:>4}  {:<id_width$}  {:>8}  description\n", "rank", "id", "distance");
    for (i, r) in result.results.iter().enumerate() {
        let mut text: String = r.description.chars().take(WIDTH).collect();
        if r.description.chars().count() > WIDTH {
            text.push('…');
        }
        out.push_str(&format!(
            "{:>4}  {:<id_width$}  {:>8.4}  {text}\n",
            i + 1,
            r.id,
            r.distance
        ));
    }
    out
}

pub fn query(a: QueryArgs, config: &Config) -> Result<(), Failure> {
    let store: PathBuf = config.require(a.store, "store")?;
    let n = config.pick_or(a.n, "n", DEFAULT_RESULT_COUNT as u64)?;
    if n == 0 {
        return Err(Failure::Usage("n must be at least 1".into()));
    }
    let format = config.pick_enum(a.format, "format", Format::Json)?;
    let embedder = build_embedder(&a.embedder, config)?;
    let collection = load_store(&store)?;
    let result = search(&collection, &a.text, n as usize, embedder.as_ref())?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&result)? + "\n",
        Format::Table => table(&result),
    };
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Data(e.to_string()))
}

pub fn serve(a: ServeArgs, config: &Config) -> Result<(), Failure> {
    let store: PathBuf = config.require(a.store, "store")?;
    if !store.is_file() {
        return Err(Failure::Data(format!("{}: no such store file", store.display())));
    }
    let host = config.pick_or(a.host, "host", "127.0.0.1".to_owned())?;
    let port: u16 = config.pick_or(a.port, "port", 8080)?;
    let embedder = build_embedder(&a.embedder, config)?;
    let mut origins = config.pick_list(a.cors_origin, "cors_origin");
    if origins.is_empty() {
        origins = genius_service::DEFAULT_CORS_ORIGINS.map(String::from).to_vec();
    }

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Data(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port))
            .await
            .map_err(|e| Failure::Data(format!("cannot listen on {host}:{port}: {e}")))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        let state = genius_service::AppState::new(embedder);
        genius_service::spawn_load(state.clone(), store);
        genius_service::serve(listener, genius_service::router(state, &origins)).await?;
        Ok(())
    })
}
