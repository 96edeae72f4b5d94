//! Question answering over relational tables: profile each table, embed a
//! compact text view of it, retrieve the tables closest to a question,
//! prompt a model for SQL and run that SQL read-only.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::db::{quote_ident, Database, ExecLimits, ResultSet, SqlQuery, Value};
use crate::embedder::{Embedder, EmbedderConfig};
use crate::error::{Error, Result, Stage};
use crate::llm::{Completion, LlmGateway};
use crate::pipeline::{check_fingerprint, open_or_create, Query, Retrieved};
use crate::vecstore::{Payload, RecordKind, VectorRecord};
use crate::Store;

pub const DEFAULT_SAMPLE_LIMIT: usize = 5;
pub const DEFAULT_TABLE_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub decl_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub db_id: String,
    pub name: String,
    pub columns: Vec<Column>,
    pub row_count: u64,
    pub sample_rows: Vec<Vec<Value>>,
    /// Header plus sample rows.
    pub csv: String,
}

impl TableProfile {
    pub fn record_id(&self) -> String {
        format!("{}.{}", self.db_id, self.name)
    }

    /// `table: {name}\ncolumns: {c1, c2, …}\n{csv}`
    pub fn embedding_text(&self) -> String {
        let cols: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        format!("table: {}\ncolumns: {}\n{}", self.name, cols.join(", "), self.csv)
    }

    /// `{name}({col type, …})`
    pub fn signature(&self) -> String {
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|c| {
                if c.decl_type.is_empty() {
                    c.name.clone()
                } else {
                    format!("{} {}", c.name, c.decl_type)
                }
            })
            .collect();
        format!("{}({})", self.name, cols.join(", "))
    }
}

/// RFC 4180 CSV with `\n` line endings: a header of column names, then one
/// line per row. Fields holding a comma, quote or line break are quoted.
pub fn serialize_table_csv<S: AsRef<str>>(columns: &[S], rows: &[Vec<Value>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(columns.iter().map(|c| c.as_ref()))?;
        for row in rows {
            w.write_record(row.iter().map(Value::render))?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).expect("writing csv to memory cannot fail");
    String::from_utf8(w.into_inner().expect("flushed")).expect("csv of utf-8 fields is utf-8")
}

/// One profile per user table, in catalog order; `sqlite_*` tables are
/// skipped.
pub fn profile_tables(db: &Database, sample_limit: usize) -> Result<Vec<TableProfile>> {
    let conn = db.connection();
    let unreadable = |e: rusqlite::Error| Error::DbUnreadable {
        path: db.path().to_path_buf(),
        reason: e.to_string(),
    };
    let names: Vec<String> = conn
        .prepare(
            "SELECT name FROM sqlite_master WHERE type = 'table' \
             AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY rowid",
        )
        .and_then(|mut s| s.query_map([], |r| r.get(0))?.collect())
        .map_err(unreadable)?;
    let db_id = db.db_id();
    let mut profiles = Vec::with_capacity(names.len());
    for name in names {
        let q = quote_ident(&name);
        let columns: Vec<Column> = conn
            .prepare(&format!("PRAGMA table_info({q})"))
            .and_then(|mut s| {
                s.query_map([], |r| {
                    Ok(Column {
                        name: r.get(1)?,
                        decl_type: r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                    })
                })?
                .collect()
            })
            .map_err(unreadable)?;
        let row_count: i64 = conn
            .query_row(&format!("SELECT count(*) FROM {q}"), [], |r| r.get(0))
            .map_err(unreadable)?;
        let sample_rows: Vec<Vec<Value>> = conn
            .prepare(&format!("SELECT * FROM {q} LIMIT {sample_limit}"))
            .and_then(|mut s| {
                let width = s.column_count();
                s.query_map([], |r| {
                    (0..width)
                        .map(|i| r.get::<_, rusqlite::types::Value>(i).map(from_sql_value))
                        .collect()
                })?
                .collect()
            })
            .map_err(unreadable)?;
        let header: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        let csv = serialize_table_csv(&header, &sample_rows);
        profiles.push(TableProfile {
            db_id: db_id.clone(),
            name,
            columns,
            row_count: row_count as u64,
            sample_rows,
            csv,
        });
    }
    Ok(profiles)
}

fn from_sql_value(v: rusqlite::types::Value) -> Value {
    use rusqlite::types::Value as V;
    match v {
        V::Null => Value::Null,
        V::Integer(i) => Value::Integer(i),
        V::Real(f) => Value::Real(f),
        V::Text(s) => Value::Text(s),
        V::Blob(b) => Value::Blob(b),
    }
}

/// Appends one `table` record per profile (id `<db_id>.<name>`).
pub fn index_tables_into(store: &mut Store, profiles: &[TableProfile], embedder: &dyn Embedder) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::InvalidInput("no tables to index".into()));
    }
    check_fingerprint(store, embedder)?;
    let texts: Vec<String> = profiles.iter().map(TableProfile::embedding_text).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let vectors = embedder.embed_batch(&refs)?;
    for ((profile, text), vector) in profiles.iter().zip(texts).zip(vectors) {
        let mut metadata = BTreeMap::new();
        metadata.insert("db_id".to_string(), profile.db_id.clone());
        metadata.insert("name".to_string(), profile.name.clone());
        store.insert(VectorRecord {
            id: profile.record_id(),
            vector,
            payload: Payload {
                kind: RecordKind::Table,
                text,
                metadata,
            },
        })?;
    }
    Ok(())
}

/// Indexes into the store at `store_path` (created if missing) and saves it.
pub fn index_tables(profiles: &[TableProfile], embedder_config: &EmbedderConfig, store_path: &Path) -> Result<Store> {
    let embedder = embedder_config.build()?;
    let mut store = open_or_create(store_path, embedder.as_ref())?;
    index_tables_into(&mut store, profiles, embedder.as_ref())?;
    store.save(store_path)?;
    Ok(store)
}

/// The `k` tables whose embedding text is most similar to the question.
pub fn select_tables(query: &Query, store: &Store, k: usize, embedder: &dyn Embedder) -> Result<Vec<Retrieved>> {
    if let Some(r) = store.records().iter().find(|r| r.payload.kind != RecordKind::Table) {
        return Err(Error::InvalidInput(format!("store record {:?} is not a table", r.id)));
    }
    check_fingerprint(store, embedder)?;
    let q = embedder.embed(query.as_str())?;
    Ok(store.query_top_k(&q, k)?.into_iter().map(Retrieved::from).collect())
}

/// Per table `Table {name}({col type, …})\n{csv}\n\n`, then
/// `Question: {query}\nSQL:`. The CSV's final line break is dropped so
/// blocks are separated by exactly one blank line.
pub fn compose_sql_prompt(selected: &[&TableProfile], query: &Query) -> Result<String> {
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut prompt = String::new();
    for t in selected {
        prompt.push_str("Table ");
        prompt.push_str(&t.signature());
        prompt.push('\n');
        prompt.push_str(t.csv.strip_suffix('\n').unwrap_or(&t.csv));
        prompt.push_str("\n\n");
    }
    prompt.push_str("Question: ");
    prompt.push_str(query.as_str());
    prompt.push_str("\nSQL:");
    Ok(prompt)
}

/// Pulls the first SQL statement out of a completion: trims, unwraps a
/// Markdown code fence if present and cuts at the first top-level `;`.
pub fn extract_sql(completion: &str) -> Result<SqlQuery> {
    let mut text = completion.trim();
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        // Skip an info string such as `sql`.
        let body = match after.find('\n') {
            Some(nl) if !after[..nl].contains(char::is_whitespace) || after[..nl].trim().is_empty() => {
                &after[nl + 1..]
            }
            _ => after,
        };
        text = body.find("```").map_or(body, |end| &body[..end]);
    }
    let text = match crate::db::first_statement_end(text) {
        Some(end) => &text[..end],
        None => text,
    };
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::EmptyGeneration);
    }
    SqlQuery::new(text)
}

pub fn generate_sql(prompt: &str, llm: &LlmGateway) -> Result<(SqlQuery, Completion)> {
    let completion = llm.complete(prompt)?;
    Ok((extract_sql(&completion.text)?, completion))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabularOptions {
    pub k: usize,
    pub sample_limit: usize,
    pub limits: ExecLimits,
}

impl Default for TabularOptions {
    fn default() -> Self {
        TabularOptions {
            k: DEFAULT_TABLE_K,
            sample_limit: DEFAULT_SAMPLE_LIMIT,
            limits: ExecLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub kind: String,
    pub message: String,
}

/// Everything each stage produced, up to the first failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularTrace {
    pub question: Query,
    pub selected: Vec<Retrieved>,
    pub prompt: Option<String>,
    pub completion: Option<Completion>,
    pub sql: Option<SqlQuery>,
    pub result: Option<ResultSet>,
    pub error: Option<StageFailure>,
}

#[derive(Debug)]
pub struct TabularAnswer {
    pub trace: TabularTrace,
    /// The result rows, or the first failure wrapped in [`Error::Stage`].
    pub outcome: Result<ResultSet>,
}

/// select tables → compose prompt → generate SQL → execute.
pub fn answer_tabular(
    query: &Query,
    db: &Database,
    store: &Store,
    embedder: &dyn Embedder,
    llm: &LlmGateway,
    options: TabularOptions,
) -> TabularAnswer {
    let mut trace = TabularTrace {
        question: query.clone(),
        selected: Vec::new(),
        prompt: None,
        completion: None,
        sql: None,
        result: None,
        error: None,
    };
    let outcome = run_stages(query, db, store, embedder, llm, options, &mut trace);
    if let Err(Error::Stage { stage, source }) = &outcome {
        trace.error = Some(StageFailure {
            stage: *stage,
            kind: source.kind().to_string(),
            message: source.to_string(),
        });
    }
    TabularAnswer { trace, outcome }
}

fn run_stages(
    query: &Query,
    db: &Database,
    store: &Store,
    embedder: &dyn Embedder,
    llm: &LlmGateway,
    options: TabularOptions,
    trace: &mut TabularTrace,
) -> Result<ResultSet> {
    let at = |stage: Stage| move |e: Error| Error::Stage { stage, source: Box::new(e) };

    trace.selected = select_tables(query, store, options.k, embedder).map_err(at(Stage::SelectTables))?;
    let profiles = profile_tables(db, options.sample_limit).map_err(at(Stage::SelectTables))?;
    let by_id: BTreeMap<String, &TableProfile> = profiles.iter().map(|p| (p.record_id(), p)).collect();
    let chosen = trace
        .selected
        .iter()
        .map(|r| {
            by_id.get(&r.id).copied().ok_or_else(|| {
                Error::InvalidInput(format!("indexed table {:?} is not in {}", r.id, db.path().display()))
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(at(Stage::SelectTables))?;

    let prompt = compose_sql_prompt(&chosen, query).map_err(at(Stage::ComposePrompt))?;
    trace.prompt = Some(prompt.clone());

    let completion = llm.complete(&prompt).map_err(at(Stage::GenerateSql))?;
    trace.completion = Some(completion.clone());
    let sql = extract_sql(&completion.text).map_err(at(Stage::GenerateSql))?;
    trace.sql = Some(sql.clone());

    let result = db.execute(&sql, options.limits).map_err(at(Stage::ExecuteSql))?;
    trace.result = Some(result.clone());
    Ok(result)
}
