//! `genius`: build, query and evaluate a scenario collection from vehicle logs.
//!
//! Exit codes: 0 success, 2 data or adapter failure, 64 usage error.

mod commands;
mod config;
mod eval;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "genius", version, about = "Natural-language search over vehicle-log scenarios")]
struct Cli {
    /// Flat key/value config file [default: ./genius.toml when present]
    #[arg(long, global = true, env = "GENIUS_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic demo corpus (8 categories × 10 scenarios)
    Demo(DemoArgs),
    /// Cut logs into fixed-length scenario files
    Ingest(IngestArgs),
    /// Describe, embed and store scenarios
    Index(IndexArgs),
    /// Search a store with natural language
    Query(QueryArgs),
    /// Retrieval and model-comparison metrics
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve the HTTP API over a store
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Per-query distance statistics, ARLG and Z-score verdicts
    Retrieval(eval::RetrievalArgs),
    /// Correct-vs-incorrect distance comparison over repeated runs
    Models(eval::ModelsArgs),
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// Directory to write the corpus into
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Glob matching manifest.json files
    #[arg(long)]
    manifest: String,
    /// Scenario length in seconds [default: 30]
    #[arg(long, env = "GENIUS_WINDOW")]
    window: Option<f64>,
    /// Output directory for scenario files
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedderKind {
    Hash,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CombinerKind {
    Template,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VisionKind {
    None,
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
struct EmbedderArgs {
    /// Embedding backend [default: hash]
    #[arg(long, env = "GENIUS_EMBEDDER")]
    embedder: Option<EmbedderKind>,
    /// Base URL of the embedding service
    #[arg(long, env = "GENIUS_EMBEDDER_ENDPOINT")]
    embedder_endpoint: Option<String>,
    /// Expected dimension of remote embeddings
    #[arg(long, env = "GENIUS_EMBEDDER_DIM")]
    embedder_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Directory of scenario files from `genius ingest`
    #[arg(long, env = "GENIUS_SCENARIOS")]
    scenarios: Option<PathBuf>,
    /// Signal description rules (JSON)
    #[arg(long, env = "GENIUS_RULES")]
    rules: Option<PathBuf>,
    /// Store file to write
    #[arg(long, env = "GENIUS_STORE")]
    store: Option<PathBuf>,
    #[command(flatten)]
    embedder: EmbedderArgs,
    /// How signal and camera text are merged [default: template]
    #[arg(long, env = "GENIUS_COMBINER")]
    combiner: Option<CombinerKind>,
    #[arg(long, env = "GENIUS_COMBINER_ENDPOINT")]
    combiner_endpoint: Option<String>,
    /// Prompt for the remote combiner; may use {signal_text} and {vision_text}
    #[arg(long, env = "GENIUS_COMBINER_PROMPT")]
    combiner_prompt: Option<String>,
    /// Camera-frame describer [default: none]
    #[arg(long, env = "GENIUS_VISION")]
    vision: Option<VisionKind>,
    #[arg(long, env = "GENIUS_VISION_ENDPOINT")]
    vision_endpoint: Option<String>,
    /// JSON map from frame file stem to text, for `--vision stub`
    #[arg(long, env = "GENIUS_VISION_MAP")]
    vision_map: Option<PathBuf>,
    #[arg(long, env = "GENIUS_VISION_PROMPT")]
    vision_prompt: Option<String>,
    /// Parallel describe workers [default: available cores]
    #[arg(long, env = "GENIUS_WORKERS", value_parser = positive)]
    workers: Option<u64>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long, env = "GENIUS_STORE")]
    store: Option<PathBuf>,
    /// Natural-language query
    #[arg(long)]
    text: String,
    /// Number of results [default: 10]
    #[arg(long, env = "GENIUS_N", value_parser = positive)]
    n: Option<u64>,
    /// Output format [default: json]
    #[arg(long, env = "GENIUS_FORMAT")]
    format: Option<Format>,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "GENIUS_STORE")]
    store: Option<PathBuf>,
    /// Interface to bind [default: 127.0.0.1]
    #[arg(long, env = "GENIUS_HOST")]
    host: Option<String>,
    /// [default: 8080]
    #[arg(long, env = "GENIUS_PORT")]
    port: Option<u16>,
    #[command(flatten)]
    embedder: EmbedderArgs,
    /// Allowed browser origin; repeat for several [default: the UI dev server]
    #[arg(long, env = "GENIUS_CORS_ORIGIN", value_delimiter = ',')]
    cors_origin: Vec<String>,
}

fn positive(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration (exit 64).
    Usage(String),
    /// Input data, store or adapter failure (exit 2).
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 64,
            Failure::Data(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Demo(a) => commands::demo(a),
        Command::Ingest(a) => commands::ingest(a, &config),
        Command::Index(a) => commands::index(a, &config),
        Command::Query(a) => commands::query(a, &config),
        Command::Eval(EvalCommand::Retrieval(a)) => eval::retrieval(a, &config),
        Command::Eval(EvalCommand::Models(a)) => eval::models(a),
        Command::Serve(a) => commands::serve(a, &config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genius: {e}");
            ExitCode::from(e.code())
        }
    }
}
