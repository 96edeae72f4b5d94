//! `gtr`: ingest documents or database schemas, ask questions, and score
//! results.
//!
//! Settings come from flags first, then `GTR_*` environment variables, then
//! built-in defaults.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gtr_core::chunker::{self, ChunkConfig};
use gtr_core::db::{Database, ExecLimits};
use gtr_core::embedder::{self, EmbedderConfig};
use gtr_core::llm::{self, LlmConfig, LlmGateway};
use gtr_core::pipeline::{self, Query};
use gtr_core::tabular::{self, TabularOptions};
use gtr_core::{sqleval, text_metrics, Error, Result, Store};

#[derive(Parser)]
#[command(name = "gtr", version, about = "Retrieval-augmented answers over documents and SQL databases")]
#[command(after_help = "Precedence: flags > environment (GTR_LLM_URL, GTR_EMBED_URL, GTR_STORE) > defaults.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk, embed and store documents (.txt as one document, .jsonl as {"id","text"} lines).
    Ingest(IngestArgs),
    /// Answer a question from the stored chunks.
    Ask(AskArgs),
    /// Index database tables or answer questions with generated SQL.
    Tables {
        #[command(subcommand)]
        command: TablesCommand,
    },
    /// Score answers or SQL predictions.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Write every stored vector as CSV.
    ExportEmbeddings {
        #[arg(long, env = "GTR_STORE")]
        store: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TablesCommand {
    /// Profile every table of a database and store one embedding per table.
    Ingest(TablesIngestArgs),
    /// Select tables, generate SQL, run it and print the rows.
    Ask(TablesAskArgs),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// ROUGE, SAS and truthfulness over a JSONL file of judged answers.
    Text(EvalTextArgs),
    /// Exact-set-match and execution accuracy of predicted SQL.
    Sql(EvalSqlArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderKind {
    Hashed,
    Http,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, value_enum, default_value = "hashed")]
    embedder: EmbedderKind,
    #[arg(long, default_value_t = embedder::DEFAULT_DIM)]
    dim: usize,
    /// Endpoint of the http embedder.
    #[arg(long, env = "GTR_EMBED_URL")]
    embed_url: Option<String>,
    #[arg(long, default_value_t = embedder::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
}

impl EmbedArgs {
    fn config(&self) -> Result<EmbedderConfig> {
        let cfg = match self.embedder {
            EmbedderKind::Hashed => EmbedderConfig::hashed_bow(self.dim),
            EmbedderKind::Http => {
                let url = self
                    .embed_url
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("--embedder http needs --embed-url or GTR_EMBED_URL".into()))?;
                EmbedderConfig::http(url, self.dim)
            }
        };
        Ok(cfg.with_batch_size(self.batch_size))
    }
}

#[derive(Args)]
struct LlmArgs {
    /// `echo`, `fixed:TEXT`, `template:FILE.json` or `http`.
    #[arg(long, default_value = "echo")]
    llm: String,
    /// Completions endpoint of the http backend.
    #[arg(long, env = "GTR_LLM_URL")]
    llm_url: Option<String>,
    #[arg(long, default_value_t = llm::DEFAULT_MAX_NEW_TOKENS)]
    max_new_tokens: usize,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
}

impl LlmArgs {
    fn gateway(&self) -> Result<LlmGateway> {
        let mut cfg = match self.llm.as_str() {
            "echo" => LlmConfig::echo(),
            "http" => LlmConfig::http(
                self.llm_url
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("--llm http needs --llm-url or GTR_LLM_URL".into()))?,
            ),
            other => {
                if let Some(text) = other.strip_prefix("fixed:") {
                    LlmConfig::fixed(text)
                } else if let Some(path) = other.strip_prefix("template:") {
                    LlmConfig::template_sql_from_file(Path::new(path))?
                } else {
                    return Err(Error::InvalidConfig(format!(
                        "unknown --llm {other:?}; use echo, fixed:TEXT, template:FILE or http"
                    )));
                }
            }
        };
        cfg.max_new_tokens = self.max_new_tokens;
        cfg.temperature = self.temperature;
        LlmGateway::new(cfg)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, env = "GTR_STORE")]
    store: PathBuf,
    #[arg(long, default_value_t = chunker::DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    #[arg(long, default_value_t = chunker::DEFAULT_OVERLAP)]
    overlap: usize,
    /// Start a new store instead of adding to an existing one.
    #[arg(long)]
    replace: bool,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct AskArgs {
    question: String,
    #[arg(long, env = "GTR_STORE")]
    store: PathBuf,
    #[arg(long, default_value_t = pipeline::DEFAULT_K)]
    k: usize,
    /// Append the answer trace as one JSON line to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct TablesIngestArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long, env = "GTR_STORE")]
    store: PathBuf,
    #[arg(long, default_value_t = tabular::DEFAULT_SAMPLE_LIMIT)]
    sample_limit: usize,
    #[arg(long)]
    replace: bool,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct TablesAskArgs {
    question: String,
    #[arg(long)]
    db: PathBuf,
    #[arg(long, env = "GTR_STORE")]
    store: PathBuf,
    #[arg(long, default_value_t = tabular::DEFAULT_TABLE_K)]
    k: usize,
    #[arg(long, default_value_t = tabular::DEFAULT_SAMPLE_LIMIT)]
    sample_limit: usize,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = gtr_core::db::DEFAULT_ROW_LIMIT)]
    row_limit: usize,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct EvalTextArgs {
    #[arg(long)]
    items: PathBuf,
    /// Write the per-item JSONL report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct EvalSqlArgs {
    /// One `SQL<TAB>db_id` per line.
    #[arg(long)]
    gold: PathBuf,
    /// One SQL per line, aligned with --gold.
    #[arg(long)]
    pred: PathBuf,
    /// Directory holding `<db_id>/<db_id>.sqlite` (or `<db_id>.sqlite`).
    #[arg(long)]
    db_dir: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every logical core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Ask(a) => ask(a),
        Command::Tables {
            command: TablesCommand::Ingest(a),
        } => tables_ingest(a),
        Command::Tables {
            command: TablesCommand::Ask(a),
        } => tables_ask(a),
        Command::Eval {
            command: EvalCommand::Text(a),
        } => eval_text(a),
        Command::Eval {
            command: EvalCommand::Sql(a),
        } => eval_sql(a),
        Command::ExportEmbeddings { store, out } => {
            let csv = Store::load(&store)?.to_csv();
            emit(out.as_deref(), &csv)
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn append_line(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| writeln!(f, "{line}"))
        .map_err(|e| io_err(path, e))
}

fn remove_if(replace: bool, store: &Path) -> Result<()> {
    if replace && store.exists() {
        fs::remove_file(store).map_err(|e| io_err(store, e))?;
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let chunking = ChunkConfig::new(a.chunk_size, a.overlap)?;
    let embed = a.embed.config()?;
    let mut docs = Vec::new();
    for path in &a.inputs {
        docs.extend(chunker::load_documents(path)?);
    }
    remove_if(a.replace, &a.store)?;
    let before = if a.store.exists() { Store::load(&a.store)?.len() } else { 0 };
    let store = pipeline::ingest(&docs, chunking, &embed, &a.store)?;
    println!(
        "docs={} chunks={} dim={} store={}",
        docs.len(),
        store.len() - before,
        store.dim(),
        a.store.display()
    );
    Ok(())
}

fn ask(a: AskArgs) -> Result<()> {
    let query = Query::new(a.question)?;
    let store = Store::load(&a.store)?;
    let embedder = a.embed.config()?.build()?;
    let llm = a.llm.gateway()?;
    let trace = pipeline::answer_with(&query, &store, a.k, embedder.as_ref(), &llm)?;
    println!("{}", trace.answer);
    if let Some(path) = &a.trace {
        append_line(path, &trace)?;
    }
    Ok(())
}

fn tables_ingest(a: TablesIngestArgs) -> Result<()> {
    let db = Database::open(&a.db)?;
    let profiles = tabular::profile_tables(&db, a.sample_limit)?;
    remove_if(a.replace, &a.store)?;
    let embed = a.embed.config()?;
    tabular::index_tables(&profiles, &embed, &a.store)?;
    println!("db={} tables={} store={}", db.db_id(), profiles.len(), a.store.display());
    Ok(())
}

fn tables_ask(a: TablesAskArgs) -> Result<()> {
    let query = Query::new(a.question)?;
    let db = Database::open(&a.db)?;
    let store = Store::load(&a.store)?;
    let embedder = a.embed.config()?.build()?;
    let llm = a.llm.gateway()?;
    let options = TabularOptions {
        k: a.k,
        sample_limit: a.sample_limit,
        limits: ExecLimits {
            timeout: Duration::from_millis(a.timeout_ms),
            row_limit: a.row_limit,
        },
    };
    let answer = tabular::answer_tabular(&query, &db, &store, embedder.as_ref(), &llm, options);
    if let Some(path) = &a.trace {
        append_line(path, &answer.trace)?;
    }
    if let Some(sql) = &answer.trace.sql {
        eprintln!("sql: {}", sql.text);
    }
    let rows = answer.outcome?;
    print!("{}", tabular::serialize_table_csv(&rows.columns, &rows.rows));
    if rows.truncated {
        eprintln!("note: output truncated at {} rows", a.row_limit);
    }
    Ok(())
}

fn eval_text(a: EvalTextArgs) -> Result<()> {
    let items = text_metrics::load_eval_items(&a.items)?;
    let embedder = a.embed.config()?.build()?;
    let report = text_metrics::aggregate(&items, embedder.as_ref())?;
    if let Some(out) = &a.out {
        emit(Some(out), &report.to_jsonl())?;
    }
    print!("{}", report.summary_table());
    Ok(())
}

fn eval_sql(a: EvalSqlArgs) -> Result<()> {
    let pairs = sqleval::read_pairs(&a.gold, &a.pred)?;
    let report = sqleval::evaluate_suite(&pairs, &a.db_dir, a.jobs)?;
    if let Some(out) = &a.out {
        emit(Some(out), &report.to_jsonl())?;
    }
    for item in report.items.iter().filter(|i| i.error.is_some()) {
        eprintln!("item {}: {}", item.index + 1, item.error.as_deref().unwrap_or_default());
    }
    print!("{}", report.summary_table());
    Ok(())
}
